use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SceneFile, FORMAT_VERSION};
use crate::error::{PlanError, Result};
use crate::smooth::PlanningQuery;

/// `P²` boxes centered on the integer grid `{1..P}²`. Each box is elongated
/// along x or y with equal probability; its short and long half-extents are
/// drawn from U[0, 0.5] and U[0, 2], so a box spans `center ± extent`.
///
/// Scenes are reproducible: the generator is ChaCha8 seeded with `seed`,
/// and boxes are drawn in row-major order (orientation, short, long).
pub fn gen_grid(side: usize, seed: u64) -> Result<SceneFile> {
    if side < 2 {
        return Err(PlanError::InvalidInput(format!("grid side must be at least 2, got {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower = Vec::with_capacity(side * side);
    let mut upper = Vec::with_capacity(side * side);
    for i in 1..=side {
        for j in 1..=side {
            let horizontal = rng.gen_bool(0.5);
            let short = rng.gen_range(0.0..=0.5);
            let long = rng.gen_range(0.0..=2.0);
            let (wx, wy) = if horizontal { (long, short) } else { (short, long) };
            let (cx, cy) = (i as f64, j as f64);
            lower.push(vec![cx - wx, cy - wy]);
            upper.push(vec![cx + wx, cy + wy]);
        }
    }
    Ok(SceneFile {
        version: FORMAT_VERSION,
        dim: 2,
        lower,
        upper,
    })
}

/// Knobs of the village generator.
#[derive(Debug, Clone, PartialEq)]
pub struct VillageParams {
    /// Building anchors sit at cell indices that are multiples of this.
    pub anchor_spacing: usize,
    /// Steps of each building's random walk.
    pub walk_length: usize,
    /// Collision radius the boxes are shrunk by.
    pub radius: f64,
    /// Top of every safe box; buildings have this height.
    pub ceiling: f64,
    pub bush_side: (f64, f64),
    pub foliage_side: f64,
    pub foliage_height: (f64, f64),
    pub trunk_side: f64,
}

impl Default for VillageParams {
    fn default() -> Self {
        Self {
            anchor_spacing: 5,
            walk_length: 5,
            radius: 0.1,
            ceiling: 5.0,
            bush_side: (0.2, 0.7),
            foliage_side: 0.8,
            foliage_height: (1.0, 4.5),
            trunk_side: 0.2,
        }
    }
}

/// A generated village and its cell bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Village {
    pub scene: SceneFile,
    pub side: usize,
    /// Cells `(i, j)`, `1 <= i, j <= P - 1`, taken by buildings.
    pub building_cells: Vec<(usize, usize)>,
    /// Cell of every box, in box order.
    pub box_cells: Vec<(usize, usize)>,
}

impl Village {
    /// Take-off at `(1, 1, 0)`, landing at `(P, P, 0)`, at rest on both ends.
    pub fn query(&self) -> PlanningQuery {
        let p = self.side as f64;
        let rest = vec![vec![0.0; 3]; 3];
        PlanningQuery::new(vec![1.0, 1.0, 0.0], vec![p, p, 0.0], p, vec![0.0, 0.0, 0.0, 1.0])
            .with_boundary_derivatives(rest.clone(), rest)
    }
}

/// A 3-D village on the unit cells of a `P × P` grid.
///
/// Buildings grow by 4-neighbour random walks from anchors on a lattice;
/// steps leaving the grid or entering the two corner cells holding the
/// endpoints are redrawn. Every other cell holds a bush or a tree with equal
/// probability, and its free space is covered by five boxes: four around
/// the obstacle and one above it. Boxes keep the collision radius from the
/// obstacle and from buildings in any of the eight neighbouring cells.
pub fn gen_village(side: usize, seed: u64, params: &VillageParams) -> Result<Village> {
    if side < 10 {
        return Err(PlanError::InvalidInput(format!("village side must be at least 10, got {side}")));
    }
    let cells = side - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut building = vec![vec![false; cells + 2]; cells + 2];
    let corner = |i: usize, j: usize| (i == 1 && j == 1) || (i == cells && j == cells);

    let anchors: Vec<usize> = (1..)
        .map(|a| a * params.anchor_spacing)
        .take_while(|&a| a + params.anchor_spacing <= side)
        .collect();
    for &ai in &anchors {
        for &aj in &anchors {
            let (mut i, mut j) = (ai, aj);
            building[i][j] = true;
            for _ in 0..params.walk_length {
                loop {
                    let (ni, nj) = match rng.gen_range(0..4) {
                        0 => (i + 1, j),
                        1 => (i - 1, j),
                        2 => (i, j + 1),
                        _ => (i, j - 1),
                    };
                    if (1..=cells).contains(&ni) && (1..=cells).contains(&nj) && !corner(ni, nj) {
                        i = ni;
                        j = nj;
                        break;
                    }
                }
                building[i][j] = true;
            }
        }
    }

    let r = params.radius;
    let top = params.ceiling;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut box_cells = Vec::new();
    let mut building_cells = Vec::new();
    for i in 1..=cells {
        for j in 1..=cells {
            if building[i][j] {
                building_cells.push((i, j));
                continue;
            }
            let (x0, y0) = (i as f64, j as f64);
            let (cx, cy) = (x0 + 0.5, y0 + 0.5);
            let b = |di: isize, dj: isize| building[(i as isize + di) as usize][(j as isize + dj) as usize];
            // Cell walls pulled in from neighbouring buildings.
            let west = x0 + if b(-1, 0) { r } else { 0.0 };
            let east = x0 + 1.0 - if b(1, 0) { r } else { 0.0 };
            let south = y0 + if b(0, -1) { r } else { 0.0 };
            let north = y0 + 1.0 - if b(0, 1) { r } else { 0.0 };

            let (half, side_top, cap_bottom) = if rng.gen_bool(0.5) {
                let s = rng.gen_range(params.bush_side.0..=params.bush_side.1);
                (s / 2.0, top, 2.0 * s + r)
            } else {
                let h = rng.gen_range(params.foliage_height.0..=params.foliage_height.1);
                let f = params.foliage_side / 2.0;
                (params.trunk_side / 2.0, h - f - r, h + f + r)
            };
            let (ox0, ox1) = (cx - half - r, cx + half + r);
            let (oy0, oy1) = (cy - half - r, cy + half + r);

            // [x0, x1, y0, y1, z0, z1]
            let mut pieces = [
                [west, ox0, south, north, 0.0, side_top],
                [ox1, east, south, north, 0.0, side_top],
                [west, east, south, oy0, 0.0, side_top],
                [west, east, oy1, north, 0.0, side_top],
                [west, east, south, north, cap_bottom.min(top), top],
            ];
            // Clearance from buildings touching only a corner of the cell.
            for (di, dj) in [(-1isize, -1isize), (-1, 1), (1, -1), (1, 1)] {
                if !b(di, dj) {
                    continue;
                }
                for (k, p) in pieces.iter_mut().enumerate() {
                    // The west and east boxes give up y, the others x.
                    let along_y = k < 2;
                    match (along_y, di, dj) {
                        (true, _, -1) => p[2] = p[2].max(y0 + r),
                        (true, _, _) => p[3] = p[3].min(y0 + 1.0 - r),
                        (false, -1, _) => p[0] = p[0].max(x0 + r),
                        (false, _, _) => p[1] = p[1].min(x0 + 1.0 - r),
                    }
                }
            }
            for p in pieces {
                lower.push(vec![p[0], p[2], p[4]]);
                upper.push(vec![p[1].max(p[0]), p[3].max(p[2]), p[5].max(p[4])]);
                box_cells.push((i, j));
            }
        }
    }
    let scene = SceneFile {
        version: FORMAT_VERSION,
        dim: 3,
        lower,
        upper,
    };
    scene.validate()?;
    Ok(Village {
        scene,
        side,
        building_cells,
        box_cells,
    })
}

/// The bundled nine-box planar scene used as a worked example.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningExample {
    pub scene: SceneFile,
    pub query: PlanningQuery,
}

const RUNNING_EXAMPLE: &str = include_str!("../../scenes/running_example.json");

/// Penalizes jerk on a unit-duration path between the bottom-left and
/// bottom-right corners of the scene. The weight puts the cost of the
/// planned path near one.
pub fn running_example() -> RunningExample {
    let scene = SceneFile::from_json(RUNNING_EXAMPLE).expect("bundled scene is valid");
    RunningExample {
        scene,
        query: PlanningQuery::new(RUNNING_INIT.to_vec(), RUNNING_TERM.to_vec(), 1.0, vec![0.0, 0.0, RUNNING_JERK_WEIGHT]),
    }
}

const RUNNING_INIT: [f64; 2] = [0.2, 0.2];
const RUNNING_TERM: [f64; 2] = [4.8, 0.2];
const RUNNING_JERK_WEIGHT: f64 = 2.685e-3;
