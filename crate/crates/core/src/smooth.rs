//! Smooth phase: a piecewise Bézier path through a fixed box sequence,
//! optimized by alternating a projection QP (times fixed) with a tangent
//! SOCP (times linearized) under a shrinking trust region.

use crate::bezier::{BezierCurve, QForm};
use crate::conic::{self, ConicProblem, LinExpr, SolveStatus, StageHint};
use crate::error::{PlanError, Result};
use crate::geometry::BoxSet;
use crate::polygonal::PolygonalCurve;

/// Lower limit on each traversal time, as a fraction of the final time.
pub const TIME_FLOOR: f64 = 1e-6;

/// Endpoints, final time, objective weights and optional boundary
/// derivatives of one planning request.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningQuery {
    pub p_init: Vec<f64>,
    pub p_term: Vec<f64>,
    pub duration: f64,
    /// `weights[i - 1]` multiplies the squared L2 norm of derivative `i`;
    /// the path has `weights.len()` continuous derivatives.
    pub weights: Vec<f64>,
    /// Values of derivatives `1..=len` at time 0.
    pub initial_derivatives: Vec<Vec<f64>>,
    /// Values of derivatives `1..=len` at the final time.
    pub final_derivatives: Vec<Vec<f64>>,
}

impl PlanningQuery {
    pub fn new(p_init: Vec<f64>, p_term: Vec<f64>, duration: f64, weights: Vec<f64>) -> Self {
        Self {
            p_init,
            p_term,
            duration,
            weights,
            initial_derivatives: Vec::new(),
            final_derivatives: Vec::new(),
        }
    }

    pub fn with_boundary_derivatives(mut self, initial: Vec<Vec<f64>>, terminal: Vec<Vec<f64>>) -> Self {
        self.initial_derivatives = initial;
        self.final_derivatives = terminal;
        self
    }

    /// Number of continuous derivatives `D`.
    pub fn derivatives(&self) -> usize {
        self.weights.len()
    }

    pub fn has_boundary_derivatives(&self) -> bool {
        !self.initial_derivatives.is_empty() || !self.final_derivatives.is_empty()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for p in [&self.p_init, &self.p_term] {
            if p.len() != dim {
                return Err(PlanError::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(PlanError::InvalidInput("endpoints must be finite".into()));
            }
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(PlanError::InvalidInput(format!("final time must be positive, got {}", self.duration)));
        }
        if self.weights.is_empty() {
            return Err(PlanError::InvalidInput("at least one objective weight is required".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(PlanError::InvalidInput("objective weights must be finite and nonnegative".into()));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(PlanError::InvalidInput("at least one objective weight must be positive".into()));
        }
        for values in [&self.initial_derivatives, &self.final_derivatives] {
            if values.len() > self.derivatives() {
                return Err(PlanError::InvalidInput(format!(
                    "{} boundary derivatives given but the path has only {}",
                    values.len(),
                    self.derivatives()
                )));
            }
            if let Some(bad) = values.iter().find(|v| v.len() != dim) {
                return Err(PlanError::DimensionMismatch { expected: dim, got: bad.len() });
            }
        }
        Ok(())
    }
}

/// Tuning of the smooth phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothParams {
    /// Bézier degree; `None` selects `2D + 1`.
    pub degree: Option<usize>,
    pub initial_trust: f64,
    pub shrink: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub solver_tol: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            degree: None,
            initial_trust: 1.0,
            shrink: 3.0,
            tolerance: 1e-2,
            max_iterations: 30,
            solver_tol: conic::TOL_SMOOTH,
        }
    }
}

impl SmoothParams {
    pub fn degree_for(&self, derivatives: usize) -> usize {
        self.degree.unwrap_or(2 * derivatives + 1)
    }
}

/// A box sequence with one traversal time per box.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMapTimes {
    pub boxes: Vec<usize>,
    pub durations: Vec<f64>,
}

impl SafetyMapTimes {
    pub fn total(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Knots `t_0 = 0, …, t_N`.
    pub fn knots(&self) -> Vec<f64> {
        let mut knots = Vec::with_capacity(self.durations.len() + 1);
        let mut t = 0.0;
        knots.push(t);
        for d in &self.durations {
            t += d;
            knots.push(t);
        }
        knots
    }
}

/// Applies the floor and rescales so the durations sum to `total`.
fn normalize_durations(durations: &mut [f64], total: f64) {
    let floor = TIME_FLOOR * total;
    for _ in 0..4 {
        for d in durations.iter_mut() {
            *d = d.max(floor);
        }
        let sum: f64 = durations.iter().sum();
        for d in durations.iter_mut() {
            *d *= total / sum;
        }
    }
}

/// Traversal times proportional to segment lengths (constant speed along
/// the curve). With boundary derivatives the end segments get twice their
/// share, since the path must speed up from and slow down to the given
/// derivative values.
pub fn init_traversal_times(curve: &PolygonalCurve, total: f64, boundary_derivatives: bool) -> Result<SafetyMapTimes> {
    if !(total > 0.0) {
        return Err(PlanError::InvalidInput(format!("final time must be positive, got {total}")));
    }
    let n = curve.num_segments();
    let lengths = curve.segment_lengths();
    let length: f64 = lengths.iter().sum();
    let mut durations = if n == 1 {
        vec![total]
    } else if length > 0.0 {
        lengths.iter().map(|l| total * l / length).collect::<Vec<_>>()
    } else {
        return Err(PlanError::InvalidInput("curve with several segments has zero length".into()));
    };
    if boundary_derivatives && n > 1 {
        durations[0] *= 2.0;
        durations[n - 1] *= 2.0;
    }
    normalize_durations(&mut durations, total);
    Ok(SafetyMapTimes {
        boxes: curve.boxes().to_vec(),
        durations,
    })
}

/// `N` Bézier pieces of common degree on consecutive time windows.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBezierPath {
    boxes: Vec<usize>,
    pieces: Vec<BezierCurve>,
    derivatives: usize,
}

impl PiecewiseBezierPath {
    /// Assembles a path from per-piece control points and durations.
    pub fn new(boxes: Vec<usize>, durations: &[f64], control_points: Vec<Vec<Vec<f64>>>, derivatives: usize) -> Result<Self> {
        if boxes.is_empty() || boxes.len() != durations.len() || boxes.len() != control_points.len() {
            return Err(PlanError::InvalidInput("boxes, durations and control points must align".into()));
        }
        let degree = control_points[0].len().saturating_sub(1);
        if control_points.iter().any(|c| c.len() != degree + 1) {
            return Err(PlanError::InvalidInput("all pieces must share one degree".into()));
        }
        if degree < derivatives {
            return Err(PlanError::InvalidInput(format!("degree {degree} cannot carry {derivatives} derivatives")));
        }
        let mut start = 0.0;
        let mut pieces = Vec::with_capacity(boxes.len());
        for (points, d) in control_points.into_iter().zip(durations) {
            let end = start + d;
            pieces.push(BezierCurve::new(start, end, points)?);
            start = end;
        }
        Ok(Self {
            boxes,
            pieces,
            derivatives,
        })
    }

    pub fn boxes(&self) -> &[usize] {
        &self.boxes
    }

    pub fn pieces(&self) -> &[BezierCurve] {
        &self.pieces
    }

    pub fn derivatives(&self) -> usize {
        self.derivatives
    }

    pub fn degree(&self) -> usize {
        self.pieces[0].degree()
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.pieces.iter().map(BezierCurve::duration).collect()
    }

    pub fn duration(&self) -> f64 {
        self.pieces.last().unwrap().end()
    }

    /// Derivative `order` of piece `j` as a Bézier curve.
    pub fn piece_derivative(&self, j: usize, order: usize) -> Result<BezierCurve> {
        let mut curve = self.pieces[j].clone();
        for _ in 0..order {
            curve = curve.derivative()?;
        }
        Ok(curve)
    }

    fn piece_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.duration()).contains(&t) {
            return Err(PlanError::InvalidInput(format!("time {t} outside [0, {}]", self.duration())));
        }
        Ok(self
            .pieces
            .partition_point(|p| p.end() < t)
            .min(self.pieces.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let j = self.piece_at(t)?;
        Ok(self.pieces[j].eval_unchecked(t.clamp(self.pieces[j].start(), self.pieces[j].end())))
    }

    pub fn eval_derivative(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let j = self.piece_at(t)?;
        let curve = self.piece_derivative(j, order)?;
        Ok(curve.eval_unchecked(t.clamp(curve.start(), curve.end())))
    }

    /// `Σ_i weights[i-1] ∫ ||p^{(i)}||²`.
    pub fn cost(&self, weights: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..self.pieces.len() {
            let mut curve = self.pieces[j].clone();
            for w in weights {
                curve = curve.derivative()?;
                if *w != 0.0 {
                    total += w * curve.squared_l2();
                }
            }
        }
        Ok(total)
    }

    /// Largest mismatch of derivatives `0..=D` across piece junctions.
    pub fn continuity_error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for j in 0..self.pieces.len().saturating_sub(1) {
            for order in 0..=self.derivatives {
                let left = self.piece_derivative(j, order)?;
                let right = self.piece_derivative(j + 1, order)?;
                let a = &left.points()[left.degree()];
                let b = &right.points()[0];
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Largest amount by which a control point leaves its piece's box.
    pub fn safety_violation(&self, set: &BoxSet) -> f64 {
        self.pieces
            .iter()
            .zip(&self.boxes)
            .flat_map(|(piece, &k)| piece.points().iter().map(move |p| set.get(k).violation(p)))
            .fold(0.0, f64::max)
    }
}

/// Variable layout shared by the projection and tangent problems.
struct Layout {
    pieces: usize,
    degree: usize,
    derivs: usize,
    dim: usize,
    // Offset of derivative order i within one piece's block.
    order_offset: Vec<usize>,
    piece_size: usize,
    base: usize,
}

impl Layout {
    fn new(problem: &mut ConicProblem, pieces: usize, degree: usize, derivs: usize, dim: usize, from_order: usize) -> Self {
        let mut order_offset = vec![0; derivs + 1];
        let mut size = 0;
        for i in from_order..=derivs {
            order_offset[i] = size;
            size += (degree - i + 1) * dim;
        }
        let base = problem.add_variables(size * pieces);
        Self {
            pieces,
            degree,
            derivs,
            dim,
            order_offset,
            piece_size: size,
            base,
        }
    }

    fn at(&self, j: usize, i: usize, n: usize, a: usize) -> usize {
        self.base + j * self.piece_size + self.order_offset[i] + n * self.dim + a
    }
}

/// Boundary, continuity and safety constraints on the control points.
fn add_path_constraints(problem: &mut ConicProblem, p: &Layout, query: &PlanningQuery, set: &BoxSet, boxes: &[usize]) {
    let (n, m, d) = (p.pieces, p.degree, p.dim);
    for a in 0..d {
        problem.add_equality(LinExpr::var(p.at(0, 0, 0, a)).plus(-query.p_init[a]));
        problem.add_equality(LinExpr::var(p.at(n - 1, 0, m, a)).plus(-query.p_term[a]));
    }
    for (i, value) in query.initial_derivatives.iter().enumerate() {
        for a in 0..d {
            problem.add_equality(LinExpr::var(p.at(0, i + 1, 0, a)).plus(-value[a]));
        }
    }
    for (i, value) in query.final_derivatives.iter().enumerate() {
        let order = i + 1;
        for a in 0..d {
            problem.add_equality(LinExpr::var(p.at(n - 1, order, m - order, a)).plus(-value[a]));
        }
    }
    for j in 0..n.saturating_sub(1) {
        for i in 0..=p.derivs {
            for a in 0..d {
                problem.add_equality(LinExpr::var(p.at(j, i, m - i, a)).term(p.at(j + 1, i, 0, a), -1.0));
            }
        }
    }
    for (j, &k) in boxes.iter().enumerate() {
        let b = set.get(k);
        for c in 0..=m {
            for a in 0..d {
                problem.add_bound(p.at(j, 0, c, a), b.lower()[a], b.upper()[a]);
            }
        }
    }
    problem.set_stage_hint(StageHint { stages: n, span: p.piece_size });
}

/// Builds the path from solver output: position control points are clamped
/// into their boxes, then polished so boundary and continuity conditions
/// hold to rounding error rather than to solver tolerance.
fn extract_path(x: &[f64], p: &Layout, set: &BoxSet, times: &SafetyMapTimes, query: &PlanningQuery) -> Result<PiecewiseBezierPath> {
    let control: Vec<Vec<Vec<f64>>> = (0..p.pieces)
        .map(|j| {
            let b = set.get(times.boxes[j]);
            (0..=p.degree)
                .map(|c| b.clamp(&(0..p.dim).map(|a| x[p.at(j, 0, c, a)]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let path = PiecewiseBezierPath::new(times.boxes.clone(), &times.durations, control, p.derivs)?;
    Ok(polish(path, query, set))
}

/// Control points closer than this to a box face are snapped onto it and
/// held fixed while polishing.
const SNAP_TOL: f64 = 1e-7;

/// Rounding a control point moves derivative `D` of its piece by about
/// `M!/(M-D)! 2^D eps |p| / T^D`; pieces where this exceeds this bound
/// cannot be corrected reliably, so their neighbours adapt to them instead.
const RIGID_NOISE: f64 = 1e-9;
/// Rounds of clamping and re-solving when a correction leaves a box.
const ACTIVE_SET_ROUNDS: usize = 8;

/// Minimum-norm correction of the free control points onto the affine set
/// cut out by the boundary and continuity conditions. A first pass moves
/// every point not on a box face; a second holds short pieces rigid so that
/// their neighbours absorb the rounding of their derivatives. Each pass is
/// kept only if it improves continuity without leaving the boxes.
fn polish(path: PiecewiseBezierPath, query: &PlanningQuery, set: &BoxSet) -> PiecewiseBezierPath {
    let n = path.pieces.len();
    let (m, derivs) = (path.degree(), path.derivatives);
    let falling = (0..derivs).map(|r| (m - r) as f64).product::<f64>();
    let noise: Vec<f64> = path
        .pieces
        .iter()
        .map(|c| {
            let size = c.points().iter().flatten().fold(1.0f64, |acc, x| acc.max(x.abs()));
            falling * 2f64.powi(derivs as i32) * f64::EPSILON * size / c.duration().powi(derivs as i32)
        })
        .collect();
    // Hold the noisiest pieces first, leaving a free neighbour on each side
    // to absorb their junction mismatch.
    let mut order: Vec<usize> = (0..n).filter(|&j| noise[j] > RIGID_NOISE).collect();
    order.sort_by(|&a, &b| noise[b].total_cmp(&noise[a]));
    let mut rigid = vec![false; n];
    for j in order {
        if !(j > 0 && rigid[j - 1]) && !(j + 1 < n && rigid[j + 1]) {
            rigid[j] = true;
        }
    }
    let mut best = path;
    let mut passes = vec![vec![false; n]];
    if rigid.iter().any(|&r| r) && !rigid.iter().all(|&r| r) {
        passes.push(rigid);
    }
    for held in passes {
        if let Some(next) = polish_pass(&best, query, set, &held) {
            let before = best.continuity_error().unwrap_or(f64::INFINITY);
            let after = next.continuity_error().unwrap_or(f64::INFINITY);
            if after <= before && next.safety_violation(set) == 0.0 {
                best = next;
            }
        }
    }
    best
}

#[derive(Clone, Copy)]
enum Residual {
    Start,
    End,
    StartDerivative(usize),
    EndDerivative(usize),
    Junction(usize, usize),
}

fn polish_pass(path: &PiecewiseBezierPath, query: &PlanningQuery, set: &BoxSet, held: &[bool]) -> Option<PiecewiseBezierPath> {
    let (n, m, d, derivs) = (path.pieces.len(), path.degree(), path.dim(), path.derivatives);
    let durations = path.durations();
    let width = m + 1;
    // Coefficients of derivative i at the start (or end) of a piece of
    // unit duration, over the first (or last) i + 1 control points.
    let falling = |i: usize| (0..i).map(|r| (m - r) as f64).product::<f64>();
    let stencil = |i: usize| -> Vec<f64> {
        (0..=i)
            .map(|k| {
                let sign = if (i - k) % 2 == 0 { 1.0 } else { -1.0 };
                sign * crate::bezier::binomial(i, k) as f64 * falling(i)
            })
            .collect()
    };

    let mut control: Vec<Vec<Vec<f64>>> = path.pieces.iter().map(|c| c.points().to_vec()).collect();
    for a in 0..d {
        let mut fixed = vec![false; n * width];
        for j in 0..n {
            let b = set.get(path.boxes[j]);
            for c in 0..width {
                if held[j] {
                    fixed[j * width + c] = true;
                }
                let v = &mut control[j][c][a];
                for bound in [b.lower()[a], b.upper()[a]] {
                    if (*v - bound).abs() <= SNAP_TOL * (1.0 + bound.abs()) {
                        *v = bound;
                        fixed[j * width + c] = true;
                    }
                }
            }
        }
        // Rows as coefficients over global point index. Residuals are taken
        // from differenced control points, as the continuity check does,
        // since summing the scaled stencil directly cancels catastrophically
        // on short pieces.
        let mut rows: Vec<(Vec<(usize, f64)>, Residual)> = Vec::new();
        rows.push((vec![(0, 1.0)], Residual::Start));
        rows.push((vec![((n - 1) * width + m, 1.0)], Residual::End));
        for idx in 0..query.initial_derivatives.len() {
            let i = idx + 1;
            let scale = durations[0].powi(i as i32);
            rows.push((stencil(i).iter().enumerate().map(|(k, w)| (k, w / scale)).collect(), Residual::StartDerivative(i)));
        }
        for idx in 0..query.final_derivatives.len() {
            let i = idx + 1;
            let scale = durations[n - 1].powi(i as i32);
            let base = (n - 1) * width + m - i;
            rows.push((stencil(i).iter().enumerate().map(|(k, w)| (base + k, w / scale)).collect(), Residual::EndDerivative(i)));
        }
        for j in 0..n.saturating_sub(1) {
            for i in 0..=derivs {
                let left = durations[j].powi(i as i32);
                let right = durations[j + 1].powi(i as i32);
                let mut row = Vec::with_capacity(2 * i + 2);
                for (k, w) in stencil(i).into_iter().enumerate() {
                    row.push((j * width + m - i + k, w / left));
                    row.push(((j + 1) * width + k, -w / right));
                }
                rows.push((row, Residual::Junction(j, i)));
            }
        }

        let original: Vec<f64> = (0..n * width).map(|g| control[g / width][g % width][a]).collect();
        for _ in 0..ACTIVE_SET_ROUNDS {
            let free: Vec<usize> = (0..n * width).filter(|&g| !fixed[g]).collect();
            let mut column = vec![usize::MAX; n * width];
            for (col, &g) in free.iter().enumerate() {
                column[g] = col;
            }
            // Derivative control points of every piece along this axis.
            let diffs: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|j| {
                    let mut levels = vec![control[j].iter().map(|p| p[a]).collect::<Vec<f64>>()];
                    for i in 0..derivs.max(query.initial_derivatives.len()) {
                        let scale = (m - i) as f64 / durations[j];
                        let next = levels[i].windows(2).map(|w| scale * (w[1] - w[0])).collect();
                        levels.push(next);
                    }
                    levels
                })
                .collect();
            let mut matrix = nalgebra::DMatrix::<f64>::zeros(rows.len(), free.len().max(1));
            let mut rhs = nalgebra::DVector::<f64>::zeros(rows.len());
            for (r, (row, kind)) in rows.iter().enumerate() {
                // Normalize over the free part so held points do not
                // drown the row.
                let norm = row
                    .iter()
                    .filter(|(g, _)| column[*g] != usize::MAX)
                    .map(|(_, w)| w * w)
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 {
                    continue;
                }
                let residual = match *kind {
                    Residual::Start => query.p_init[a] - diffs[0][0][0],
                    Residual::End => query.p_term[a] - diffs[n - 1][0][m],
                    Residual::StartDerivative(i) => query.initial_derivatives[i - 1][a] - diffs[0][i][0],
                    Residual::EndDerivative(i) => query.final_derivatives[i - 1][a] - diffs[n - 1][i][m - i],
                    Residual::Junction(j, i) => diffs[j + 1][i][0] - diffs[j][i][m - i],
                };
                for &(g, w) in row {
                    if column[g] != usize::MAX {
                        matrix[(r, column[g])] += w / norm;
                    }
                }
                rhs[r] = residual / norm;
            }
            if free.is_empty() || rhs.amax() == 0.0 {
                break;
            }
            let delta = matrix.svd(true, true).solve(&rhs, 1e-12).ok()?;
            let mut clamped = false;
            for (col, &g) in free.iter().enumerate() {
                let (j, c) = (g / width, g % width);
                let b = set.get(path.boxes[j]);
                let moved = control[j][c][a] + delta[col];
                let inside = moved.clamp(b.lower()[a], b.upper()[a]);
                if inside != moved {
                    fixed[g] = true;
                    clamped = true;
                }
                control[j][c][a] = inside;
            }
            if !clamped {
                break;
            }
            // Retry from the unpolished values with the new faces held.
            for g in 0..n * width {
                if !fixed[g] {
                    control[g / width][g % width][a] = original[g];
                }
            }
        }
    }
    PiecewiseBezierPath::new(path.boxes.clone(), &durations, control, derivs).ok()
}

/// Optimal path for fixed traversal times, with its cost.
pub fn projection(
    times: &SafetyMapTimes,
    query: &PlanningQuery,
    set: &BoxSet,
    params: &SmoothParams,
) -> Result<(PiecewiseBezierPath, f64)> {
    let derivs = query.derivatives();
    let degree = params.degree_for(derivs);
    if degree < derivs + 1 {
        return Err(PlanError::InvalidInput(format!("degree {degree} below the minimum {}", derivs + 1)));
    }
    let (n, d) = (times.boxes.len(), set.dim());
    let mut problem = ConicProblem::new();
    let p = Layout::new(&mut problem, n, degree, derivs, d, 0);
    add_path_constraints(&mut problem, &p, query, set, &times.boxes);

    for (j, &tj) in times.durations.iter().enumerate() {
        for i in 1..=derivs {
            let scale = (degree - i + 1) as f64 / tj;
            for c in 0..=degree - i {
                for a in 0..d {
                    problem.add_equality(
                        LinExpr::var(p.at(j, i, c, a))
                            .term(p.at(j, i - 1, c + 1, a), -scale)
                            .term(p.at(j, i - 1, c, a), scale),
                    );
                }
            }
            let w = query.weights[i - 1];
            if w == 0.0 {
                continue;
            }
            let q = QForm::new(degree - i);
            for r in 0..q.size() {
                for c in 0..q.size() {
                    for a in 0..d {
                        problem.add_quadratic(p.at(j, i, r, a), p.at(j, i, c, a), w * tj * q.entry(r, c));
                    }
                }
            }
        }
    }
    let solution = conic::solve(&problem, params.solver_tol)?.require_optimal("projection")?;
    let path = extract_path(&solution.x, &p, set, times, query)?;
    let cost = path.cost(&query.weights)?;
    Ok((path, cost))
}

/// Candidate traversal times from the linearized problem, with its optimal
/// value. Returns `None` when the solver finds no solution.
pub fn tangent(
    times: &SafetyMapTimes,
    path: &PiecewiseBezierPath,
    trust: &TrustState,
    query: &PlanningQuery,
    set: &BoxSet,
    params: &SmoothParams,
) -> Result<Option<(Vec<f64>, f64)>> {
    let derivs = query.derivatives();
    let degree = path.degree();
    let (n, d) = (times.boxes.len(), set.dim());
    let floor = TIME_FLOOR * query.duration;

    let mut problem = ConicProblem::new();
    let p = Layout::new(&mut problem, n, degree, derivs, d, 0);
    let q = Layout::new(&mut problem, n, degree, derivs, d, 1);
    let t = problem.add_variables(n);
    add_path_constraints(&mut problem, &p, query, set, &times.boxes);

    let mut total = LinExpr::constant(-query.duration);
    for (j, &tbar) in times.durations.iter().enumerate() {
        total = total.term(t + j, 1.0);
        let lower = (tbar / (1.0 + trust.kappa)).max(floor);
        let upper = (tbar * (1.0 + trust.kappa)).max(lower);
        problem.add_bound(t + j, lower, upper);
    }
    problem.add_equality(total);

    let chol: Vec<Vec<f64>> = (0..=derivs).map(|i| QForm::new(degree - i.min(degree)).cholesky()).collect();
    for (j, &tbar) in times.durations.iter().enumerate() {
        let mut pbar = path.pieces()[j].clone();
        for i in 1..=derivs {
            pbar = pbar.derivative()?;
            let count = degree - i + 1;
            for c in 0..count {
                for a in 0..d {
                    let qv = q.at(j, i, c, a);
                    let diff = (degree - i + 1) as f64;
                    problem.add_equality(
                        LinExpr::var(qv)
                            .term(p.at(j, i - 1, c + 1, a), -diff)
                            .term(p.at(j, i - 1, c, a), diff),
                    );
                    // q = T p linearized at (T̄, p̄).
                    let pb = pbar.points()[c][a];
                    problem.add_equality(
                        LinExpr::var(qv)
                            .term(t + j, -pb)
                            .term(p.at(j, i, c, a), -tbar)
                            .plus(tbar * pb),
                    );
                }
            }
            let w = query.weights[i - 1];
            if w == 0.0 {
                continue;
            }
            // s >= Q(q)/T  <=>  (s + T)/2 >= ||((s - T)/2, Lᵀ q)||.
            let s = problem.add_variables(1);
            problem.add_linear_cost(s, w);
            let l = &chol[i];
            let mut cone = vec![
                LinExpr::new().term(s, 0.5).term(t + j, 0.5),
                LinExpr::new().term(s, 0.5).term(t + j, -0.5),
            ];
            for a in 0..d {
                for r in 0..count {
                    // Row r of Lᵀ: Σ_c L[c][r] q_c.
                    let mut row = LinExpr::new();
                    for c in r..count {
                        row = row.term(q.at(j, i, c, a), l[c * count + r]);
                    }
                    cone.push(row);
                }
            }
            problem.add_cone(cone);
        }
    }
    let solution = conic::solve(&problem, params.solver_tol)?;
    if solution.status != SolveStatus::Optimal {
        log::debug!("tangent problem not solved: {}", solution.backend_status);
        return Ok(None);
    }
    let mut durations: Vec<f64> = solution.x[t..t + n].to_vec();
    normalize_durations(&mut durations, query.duration);
    Ok(Some((durations, solution.objective)))
}

/// Trust-region state of the time alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustState {
    pub kappa: f64,
    pub shrink: f64,
    pub tolerance: f64,
    pub iteration: usize,
}

impl TrustState {
    pub fn new(params: &SmoothParams) -> Self {
        Self {
            kappa: params.initial_trust,
            shrink: params.shrink,
            tolerance: params.tolerance,
            iteration: 0,
        }
    }
}

/// Shrinks the trust region to the smallest radius that would have made
/// some time ratio active, divided by the shrink factor.
pub fn trust_update(trust: &TrustState, previous: &[f64], candidate: &[f64]) -> TrustState {
    let worst = previous
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a / b).max(b / a))
        .fold(1.0, f64::max);
    let kappa = ((worst - 1.0) / trust.shrink).min(trust.kappa / trust.shrink);
    TrustState {
        kappa,
        shrink: trust.shrink,
        tolerance: trust.tolerance,
        iteration: trust.iteration + 1,
    }
}

/// Per-iteration record of the smooth phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothStats {
    pub iterations: usize,
    pub converged: bool,
    /// Cost of the first projection.
    pub initial_cost: f64,
    /// Best cost after every iteration.
    pub best_costs: Vec<f64>,
    /// Projection cost the tangent problem linearized around, per iteration.
    pub projection_costs: Vec<f64>,
    /// Tangent optimal value per iteration (`NaN` when the solve failed).
    pub tangent_costs: Vec<f64>,
    pub trust_radii: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SmoothOutcome {
    pub path: PiecewiseBezierPath,
    pub cost: f64,
    pub times: SafetyMapTimes,
    pub stats: SmoothStats,
}

/// Runs the smooth phase on a safe polygonal curve.
pub fn smooth_phase(curve: &PolygonalCurve, query: &PlanningQuery, set: &BoxSet, params: &SmoothParams) -> Result<SmoothOutcome> {
    query.validate(set.dim())?;
    let times = init_traversal_times(curve, query.duration, query.has_boundary_derivatives())?;
    smooth_from_times(times, query, set, params)
}

/// Runs the alternation from given initial traversal times.
pub fn smooth_from_times(
    mut times: SafetyMapTimes,
    query: &PlanningQuery,
    set: &BoxSet,
    params: &SmoothParams,
) -> Result<SmoothOutcome> {
    let (mut path, mut cost) = projection(&times, query, set, params)?;
    let mut stats = SmoothStats {
        initial_cost: cost,
        ..Default::default()
    };
    let mut trust = TrustState::new(params);
    while stats.iterations < params.max_iterations {
        if cost <= f64::MIN_POSITIVE || trust.kappa <= 0.0 {
            stats.converged = true;
            break;
        }
        stats.iterations += 1;
        stats.projection_costs.push(cost);
        stats.trust_radii.push(trust.kappa);
        let Some((candidate, tangent_cost)) = tangent(&times, &path, &trust, query, set, params)? else {
            stats.tangent_costs.push(f64::NAN);
            trust = TrustState {
                kappa: trust.kappa / trust.shrink,
                iteration: trust.iteration + 1,
                ..trust
            };
            stats.best_costs.push(cost);
            continue;
        };
        stats.tangent_costs.push(tangent_cost);
        let gap = (cost - tangent_cost) / cost;

        let next_times = SafetyMapTimes {
            boxes: times.boxes.clone(),
            durations: candidate,
        };
        match projection(&next_times, query, set, params) {
            Ok((next_path, next_cost)) if next_cost < cost => {
                trust = trust_update(&trust, &times.durations, &next_times.durations);
                path = next_path;
                cost = next_cost;
                times = next_times;
            }
            Ok(_) => trust = trust_update(&trust, &times.durations, &next_times.durations),
            Err(e) => {
                log::debug!("projection at candidate times failed: {e}");
                trust = trust_update(&trust, &times.durations, &next_times.durations);
            }
        }
        stats.best_costs.push(cost);
        if gap < params.tolerance {
            stats.converged = true;
            break;
        }
    }
    Ok(SmoothOutcome {
        path,
        cost,
        times,
        stats,
    })
}
