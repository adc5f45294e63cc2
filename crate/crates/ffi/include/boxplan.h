#ifndef BOXPLAN_H
#define BOXPLAN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success, positive values are non-error outcomes and
 * negative values are errors.
 */
typedef enum BpStatus {
  BP_OK = 0,
  /**
   * No box sequence connects the endpoints.
   */
  BP_INFEASIBLE = 2,
  BP_NULL_POINTER = -1,
  BP_INVALID_INPUT = -2,
  BP_SOLVER_FAILURE = -3,
  BP_IO_ERROR = -4,
  BP_FORMAT_ERROR = -5,
  BP_INTERNAL_ERROR = -99,
} BpStatus;

/**
 * A planned piecewise Bézier path.
 */
typedef struct BpPath BpPath;

/**
 * A preprocessed scene, ready for queries.
 */
typedef struct BpPlanner BpPlanner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a planner from `num_boxes` boxes of dimension `dim`. `lower` and
 * `upper` hold the corners row by row, `num_boxes * dim` values each.
 *
 * # Safety
 * `lower` and `upper` must point to `num_boxes * dim` readable doubles and
 * `out` to writable storage for one handle.
 */
enum BpStatus bp_planner_new(uintptr_t dim,
                             uintptr_t num_boxes,
                             const double *lower,
                             const double *upper,
                             struct BpPlanner **out);

/**
 * Builds a planner from a scene file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum BpStatus bp_planner_from_scene_file(const char *path, struct BpPlanner **out);

/**
 * # Safety
 * `planner` must be null or a handle from `bp_planner_new*` not yet freed.
 */
void bp_planner_free(struct BpPlanner *planner);

/**
 * Dimension of the planner's scene, or 0 for a null handle.
 *
 * # Safety
 * `planner` must be null or a live handle.
 */
uintptr_t bp_planner_dim(const struct BpPlanner *planner);

/**
 * Number of boxes, or 0 for a null handle.
 *
 * # Safety
 * `planner` must be null or a live handle.
 */
uintptr_t bp_planner_num_boxes(const struct BpPlanner *planner);

/**
 * Plans from `p_init` to `p_term` over `duration`, minimizing the weighted
 * squared L2 norms of derivatives `1..=num_weights`. Boundary derivative
 * arrays are optional (null) or hold `num_weights * dim` values, order 1
 * first. `degree` 0 selects the default. On `BP_OK` `*out` receives a path;
 * on `BP_INFEASIBLE` it is set to null.
 *
 * # Safety
 * Points hold `dim` doubles, `weights` holds `num_weights`, and `out` must be
 * writable.
 */
enum BpStatus bp_plan(const struct BpPlanner *planner,
                      const double *p_init,
                      const double *p_term,
                      double duration,
                      const double *weights,
                      uintptr_t num_weights,
                      const double *initial_derivatives,
                      const double *final_derivatives,
                      uintptr_t degree,
                      struct BpPath **out);

/**
 * # Safety
 * `path` must be null or a handle from `bp_plan` not yet freed.
 */
void bp_path_free(struct BpPath *path);

/**
 * Writes derivative `order` of the path at time `t` into `out`, which must
 * hold `bp_path_dim(path)` doubles. Times are clamped to `[0, duration]`.
 *
 * # Safety
 * `path` must be a live handle and `out` writable for `dim` doubles.
 */
enum BpStatus bp_path_eval(const struct BpPath *path, double t, uintptr_t order, double *out);

/**
 * # Safety
 * `path` must be null or a live handle.
 */
uintptr_t bp_path_dim(const struct BpPath *path);

/**
 * # Safety
 * `path` must be null or a live handle.
 */
uintptr_t bp_path_num_segments(const struct BpPath *path);

/**
 * Final time of the path, or NaN for a null handle.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
double bp_path_duration(const struct BpPath *path);

/**
 * Objective value of the path, or NaN for a null handle.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
double bp_path_cost(const struct BpPath *path);

/**
 * Copies the box index of each segment into `out`, which must hold
 * `bp_path_num_segments(path)` values.
 *
 * # Safety
 * `path` must be a live handle and `out` writable.
 */
enum BpStatus bp_path_boxes(const struct BpPath *path, uintptr_t *out);

/**
 * Message of the last failing call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *bp_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOXPLAN_H */
