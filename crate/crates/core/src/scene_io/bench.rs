use std::time::Instant;

use super::{gen_grid, SceneFile};
use crate::error::{PlanError, Result};
use crate::linegraph::flood_fill_connected;
use crate::planner::{PlanOutcome, Planner};
use crate::smooth::{PlanningQuery, SmoothParams};

/// Seeds tried per side before giving up on a connected grid.
const SEED_ATTEMPTS: u64 = 10_000;

/// Corner-to-corner query on a grid of side `P`: `T = P`, acceleration and
/// jerk weighted equally.
pub fn grid_query(side: usize) -> PlanningQuery {
    let p = side as f64;
    PlanningQuery::new(vec![1.0, 1.0], vec![p, p], p, vec![0.0, 1.0, 1.0])
}

/// The first grid scene, from `seed` upwards, in which the corner boxes are
/// connected. Returns the scene and the seed that produced it.
pub fn feasible_grid(side: usize, seed: u64) -> Result<(SceneFile, u64)> {
    let query = grid_query(side);
    for s in seed..seed.saturating_add(SEED_ATTEMPTS) {
        let scene = gen_grid(side, s)?;
        if flood_fill_connected(&scene.to_box_set()?, &query.p_init, &query.p_term) {
            return Ok((scene, s));
        }
    }
    Err(PlanError::InvalidInput(format!(
        "no connected grid of side {side} within {SEED_ATTEMPTS} seeds of {seed}"
    )))
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub side: usize,
    pub seed: u64,
    pub boxes: usize,
    pub vertices: usize,
    pub edges: usize,
    pub path_boxes: usize,
    pub offline_seconds: f64,
    pub polygonal_seconds: f64,
    pub smooth_seconds: f64,
    pub polygonal_iterations: usize,
    pub smooth_iterations: usize,
    pub cost: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "side,seed,K,vertices,edges,path_boxes,offline_s,polygonal_s,smooth_s,polygonal_iterations,smooth_iterations,cost";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{:.6}",
            self.side,
            self.seed,
            self.boxes,
            self.vertices,
            self.edges,
            self.path_boxes,
            self.offline_seconds,
            self.polygonal_seconds,
            self.smooth_seconds,
            self.polygonal_iterations,
            self.smooth_iterations,
            self.cost
        )
    }
}

/// Times preprocessing and both online phases on a connected grid per side.
pub fn bench(sides: &[usize], seed: u64, params: &SmoothParams) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(sides.len());
    for &side in sides {
        let (scene, used) = feasible_grid(side, seed)?;
        let set = scene.to_box_set()?;
        let started = Instant::now();
        let planner = Planner::preprocess(set)?;
        let offline = started.elapsed().as_secs_f64();
        let outcome = planner.plan(&grid_query(side), params)?;
        let PlanOutcome::Found(plan) = outcome else {
            return Err(PlanError::InvalidInput(format!("connected grid of side {side} reported infeasible")));
        };
        rows.push(BenchRow {
            side,
            seed: used,
            boxes: scene.num_boxes(),
            vertices: planner.graph().vertices().len(),
            edges: planner.graph().edges().len(),
            path_boxes: plan.polygonal.num_segments(),
            offline_seconds: offline,
            polygonal_seconds: plan.polygonal_time.as_secs_f64(),
            smooth_seconds: plan.smooth_time.as_secs_f64(),
            polygonal_iterations: plan.polygonal_stats.insertion_rounds + 1,
            smooth_iterations: plan.smooth.stats.iterations,
            cost: plan.cost(),
        });
    }
    Ok(rows)
}
