//! C interface to the `boxplan` planner.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`BpStatus`]; on failure the message is available from
//! [`bp_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use boxplan::scene_io::SceneFile;
use boxplan::{BoxSet, PiecewiseBezierPath, PlanError, PlanOutcome, Planner, PlanningQuery, SmoothParams};

/// Result codes. Zero is success, positive values are non-error outcomes and
/// negative values are errors.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    BP_OK = 0,
    /// No box sequence connects the endpoints.
    BP_INFEASIBLE = 2,
    BP_NULL_POINTER = -1,
    BP_INVALID_INPUT = -2,
    BP_SOLVER_FAILURE = -3,
    BP_IO_ERROR = -4,
    BP_FORMAT_ERROR = -5,
    BP_INTERNAL_ERROR = -99,
}

/// A preprocessed scene, ready for queries.
pub struct BpPlanner {
    planner: Planner,
}

/// A planned piecewise Bézier path.
pub struct BpPath {
    path: PiecewiseBezierPath,
    cost: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &PlanError) -> BpStatus {
    match err {
        PlanError::Solver { .. } | PlanError::IterationCap { .. } => BpStatus::BP_SOLVER_FAILURE,
        PlanError::Io(_) => BpStatus::BP_IO_ERROR,
        PlanError::Format(_) | PlanError::Json(_) | PlanError::StaleCache { .. } => BpStatus::BP_FORMAT_ERROR,
        _ => BpStatus::BP_INVALID_INPUT,
    }
}

fn guard(f: impl FnOnce() -> Result<BpStatus, (BpStatus, String)>) -> BpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside boxplan".into());
            BpStatus::BP_INTERNAL_ERROR
        }
    }
}

fn fail(err: PlanError) -> (BpStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (BpStatus, String) {
    (BpStatus::BP_NULL_POINTER, format!("{name} is null"))
}

unsafe fn read<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], (BpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(data, len))
}

fn install(planner: Planner, out: *mut *mut BpPlanner) -> BpStatus {
    unsafe { *out = Box::into_raw(Box::new(BpPlanner { planner })) };
    BpStatus::BP_OK
}

/// Builds a planner from `num_boxes` boxes of dimension `dim`. `lower` and
/// `upper` hold the corners row by row, `num_boxes * dim` values each.
///
/// # Safety
/// `lower` and `upper` must point to `num_boxes * dim` readable doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bp_planner_new(
    dim: usize,
    num_boxes: usize,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut BpPlanner,
) -> BpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if dim == 0 {
            return Err((BpStatus::BP_INVALID_INPUT, "dimension must be positive".into()));
        }
        let n = num_boxes.checked_mul(dim).ok_or((BpStatus::BP_INVALID_INPUT, "too many boxes".into()))?;
        let lo = read(lower, n, "lower")?;
        let hi = read(upper, n, "upper")?;
        let lo: Vec<Vec<f64>> = lo.chunks(dim).map(<[f64]>::to_vec).collect();
        let hi: Vec<Vec<f64>> = hi.chunks(dim).map(<[f64]>::to_vec).collect();
        let set = BoxSet::from_bounds(&lo, &hi).map_err(fail)?;
        Ok(install(Planner::preprocess(set).map_err(fail)?, out))
    })
}

/// Builds a planner from a scene file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_planner_from_scene_file(path: *const c_char, out: *mut *mut BpPlanner) -> BpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (BpStatus::BP_INVALID_INPUT, "path is not UTF-8".into()))?;
        let scene = SceneFile::load(std::path::Path::new(path)).map_err(fail)?;
        let set = scene.to_box_set().map_err(fail)?;
        Ok(install(Planner::preprocess(set).map_err(fail)?, out))
    })
}

/// # Safety
/// `planner` must be null or a handle from `bp_planner_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_planner_free(planner: *mut BpPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Dimension of the planner's scene, or 0 for a null handle.
///
/// # Safety
/// `planner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_planner_dim(planner: *const BpPlanner) -> usize {
    planner.as_ref().map_or(0, |p| p.planner.set().dim())
}

/// Number of boxes, or 0 for a null handle.
///
/// # Safety
/// `planner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_planner_num_boxes(planner: *const BpPlanner) -> usize {
    planner.as_ref().map_or(0, |p| p.planner.set().len())
}

/// Plans from `p_init` to `p_term` over `duration`, minimizing the weighted
/// squared L2 norms of derivatives `1..=num_weights`. Boundary derivative
/// arrays are optional (null) or hold `num_weights * dim` values, order 1
/// first. `degree` 0 selects the default. On `BP_OK` `*out` receives a path;
/// on `BP_INFEASIBLE` it is set to null.
///
/// # Safety
/// Points hold `dim` doubles, `weights` holds `num_weights`, and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bp_plan(
    planner: *const BpPlanner,
    p_init: *const f64,
    p_term: *const f64,
    duration: f64,
    weights: *const f64,
    num_weights: usize,
    initial_derivatives: *const f64,
    final_derivatives: *const f64,
    degree: usize,
    out: *mut *mut BpPath,
) -> BpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let planner = &planner.as_ref().ok_or_else(|| null("planner"))?.planner;
        let dim = planner.set().dim();
        if num_weights == 0 {
            return Err((BpStatus::BP_INVALID_INPUT, "at least one weight is required".into()));
        }
        let boundary = |data: *const f64, name: &str| -> Result<Vec<Vec<f64>>, (BpStatus, String)> {
            if data.is_null() {
                return Ok(Vec::new());
            }
            Ok(read(data, num_weights * dim, name)?.chunks(dim).map(<[f64]>::to_vec).collect())
        };
        let mut query = PlanningQuery::new(
            read(p_init, dim, "p_init")?.to_vec(),
            read(p_term, dim, "p_term")?.to_vec(),
            duration,
            read(weights, num_weights, "weights")?.to_vec(),
        );
        let initial = boundary(initial_derivatives, "initial_derivatives")?;
        let terminal = boundary(final_derivatives, "final_derivatives")?;
        if !initial.is_empty() || !terminal.is_empty() {
            query = query.with_boundary_derivatives(initial, terminal);
        }
        let params = SmoothParams {
            degree: (degree > 0).then_some(degree),
            ..SmoothParams::default()
        };
        match planner.plan(&query, &params).map_err(fail)? {
            PlanOutcome::Infeasible => Ok(BpStatus::BP_INFEASIBLE),
            PlanOutcome::Found(plan) => {
                let cost = plan.cost();
                *out = Box::into_raw(Box::new(BpPath {
                    path: plan.smooth.path,
                    cost,
                }));
                Ok(BpStatus::BP_OK)
            }
        }
    })
}

/// # Safety
/// `path` must be null or a handle from `bp_plan` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_path_free(path: *mut BpPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Writes derivative `order` of the path at time `t` into `out`, which must
/// hold `bp_path_dim(path)` doubles. Times are clamped to `[0, duration]`.
///
/// # Safety
/// `path` must be a live handle and `out` writable for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_path_eval(path: *const BpPath, t: f64, order: usize, out: *mut f64) -> BpStatus {
    guard(|| {
        let path = &path.as_ref().ok_or_else(|| null("path"))?.path;
        if out.is_null() {
            return Err(null("out"));
        }
        let value = path.eval_derivative(t, order).map_err(fail)?;
        slice::from_raw_parts_mut(out, value.len()).copy_from_slice(&value);
        Ok(BpStatus::BP_OK)
    })
}

/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_path_dim(path: *const BpPath) -> usize {
    path.as_ref().map_or(0, |p| p.path.dim())
}

/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_path_num_segments(path: *const BpPath) -> usize {
    path.as_ref().map_or(0, |p| p.path.pieces().len())
}

/// Final time of the path, or NaN for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_path_duration(path: *const BpPath) -> f64 {
    path.as_ref().map_or(f64::NAN, |p| p.path.duration())
}

/// Objective value of the path, or NaN for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_path_cost(path: *const BpPath) -> f64 {
    path.as_ref().map_or(f64::NAN, |p| p.cost)
}

/// Copies the box index of each segment into `out`, which must hold
/// `bp_path_num_segments(path)` values.
///
/// # Safety
/// `path` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_path_boxes(path: *const BpPath, out: *mut usize) -> BpStatus {
    guard(|| {
        let path = &path.as_ref().ok_or_else(|| null("path"))?.path;
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, path.boxes().len()).copy_from_slice(path.boxes());
        Ok(BpStatus::BP_OK)
    })
}

/// Message of the last failing call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
