//! Polygonal phase: shorten a safe polygonal curve for a fixed box
//! sequence, then splice in boxes whose dual certificate proves that the
//! curve can get shorter, until no splice helps.

use crate::conic::{self, ConicProblem, LinExpr, TOL_SHORTENING};
use crate::error::{PlanError, Result};
use crate::geometry::{AxisBox, BoxSet};
use crate::linegraph::{distance, LineGraph};

/// A bound of a box counts as active at a point within this relative deadband.
pub const ACTIVE_TOL: f64 = 1e-7;
/// Consecutive nodes closer than this fraction of the scene diameter are merged.
pub const DEDUP_TOL: f64 = 1e-9;
/// Crossed multiplier limits (`c1 > c2`) below this size are solver noise.
pub const CROSSING_TOL: f64 = 1e-6;
/// A certificate multiplier must exceed unit norm by this much.
pub const NORM_TOL: f64 = 1e-9;
/// Solver coordinates this close (relative) to a junction bound are put on it.
const SNAP_TOL: f64 = 1e-6;
const POLISH_STEPS: usize = 30;
/// Segments shorter than this fraction of the curve length may be collapsed.
const COLLAPSE_TOL: f64 = 1e-4;

/// Nodes `y_0..y_N` and the boxes `s_1..s_N` covering each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve {
    nodes: Vec<Vec<f64>>,
    boxes: Vec<usize>,
}

impl PolygonalCurve {
    pub fn new(nodes: Vec<Vec<f64>>, boxes: Vec<usize>) -> Self {
        assert_eq!(nodes.len(), boxes.len() + 1, "a curve has one more node than segments");
        Self { nodes, boxes }
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn boxes(&self) -> &[usize] {
        &self.boxes
    }

    pub fn num_segments(&self) -> usize {
        self.boxes.len()
    }

    pub fn length(&self) -> f64 {
        self.nodes.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| distance(&w[0], &w[1])).collect()
    }

    /// Every segment has both endpoints in its box (hence lies in it).
    pub fn is_safe(&self, set: &BoxSet) -> bool {
        self.boxes
            .iter()
            .enumerate()
            .all(|(j, &k)| set.get(k).contains(&self.nodes[j]) && set.get(k).contains(&self.nodes[j + 1]))
    }

    /// Drops a node between two identical boxes; the merged segment stays
    /// in the box by convexity.
    fn collapse_repeats(&mut self) {
        let mut j = 0;
        while j + 1 < self.boxes.len() {
            if self.boxes[j] == self.boxes[j + 1] {
                self.boxes.remove(j + 1);
                self.nodes.remove(j + 1);
            } else {
                j += 1;
            }
        }
    }

    /// Merges consecutive nodes closer than `tol`, removing the box of the
    /// vanishing segment when the merged node fits the neighbouring boxes.
    /// Returns whether anything was merged.
    fn merge_coincident(&mut self, set: &BoxSet, tol: f64) -> bool {
        let mut merged = false;
        let mut j = 0;
        while j < self.boxes.len() {
            let n = self.boxes.len();
            if n == 1 || distance(&self.nodes[j], &self.nodes[j + 1]) > tol {
                j += 1;
                continue;
            }
            let removable = if j == 0 {
                set.get(self.boxes[1]).contains(&self.nodes[0])
            } else if j == n - 1 {
                set.get(self.boxes[n - 2]).contains(&self.nodes[n])
            } else {
                match set.get(self.boxes[j - 1]).intersection(set.get(self.boxes[j + 1])).ok().flatten() {
                    Some(overlap) => {
                        let z = overlap.clamp(&self.nodes[j + 1]);
                        if distance(&z, &self.nodes[j + 1]) <= tol {
                            self.nodes[j + 1] = z;
                            true
                        } else {
                            false
                        }
                    }
                    None => false,
                }
            };
            if !removable {
                j += 1;
                continue;
            }
            self.boxes.remove(j);
            // Keep the fixed endpoint when the first segment vanishes.
            self.nodes.remove(if j == 0 { 1 } else { j });
            merged = true;
        }
        if merged {
            self.collapse_repeats();
        }
        merged
    }
}

fn junction(set: &BoxSet, a: usize, b: usize) -> Result<AxisBox> {
    set.get(a)
        .intersection(set.get(b))?
        .ok_or_else(|| PlanError::InvalidInput(format!("consecutive boxes {a} and {b} do not intersect")))
}

/// One solve of the length-minimization SOCP for the curve's box sequence.
pub(crate) fn solve_shortening(curve: &PolygonalCurve, set: &BoxSet, tol: f64) -> Result<PolygonalCurve> {
    let n = curve.num_segments();
    if n == 1 {
        return Ok(curve.clone());
    }
    let d = set.dim();
    let junctions: Vec<AxisBox> = curve
        .boxes
        .windows(2)
        .map(|w| junction(set, w[0], w[1]))
        .collect::<Result<_>>()?;

    let mut problem = ConicProblem::new();
    let free = problem.add_variables((n - 1) * d);
    let lengths = problem.add_variables(n);
    for (j, overlap) in junctions.iter().enumerate() {
        for a in 0..d {
            problem.add_bound(free + j * d + a, overlap.lower()[a], overlap.upper()[a]);
        }
    }
    let first = &curve.nodes[0];
    let last = &curve.nodes[n];
    // Coordinate `a` of node `j` as an affine expression.
    let coord = |j: usize, a: usize| -> LinExpr {
        if j == 0 {
            LinExpr::constant(first[a])
        } else if j == n {
            LinExpr::constant(last[a])
        } else {
            LinExpr::var(free + (j - 1) * d + a)
        }
    };
    for j in 1..=n {
        problem.add_linear_cost(lengths + j - 1, 1.0);
        let mut cone = vec![LinExpr::var(lengths + j - 1)];
        for a in 0..d {
            let head = coord(j, a);
            let tail = coord(j - 1, a);
            let mut diff = head;
            diff.constant -= tail.constant;
            for (i, c) in tail.terms {
                diff.terms.push((i, -c));
            }
            cone.push(diff);
        }
        problem.add_cone(cone);
    }
    problem.set_stage_hint(conic::StageHint { stages: n, span: d + 1 });
    let solution = conic::solve(&problem, tol)?.require_optimal("curve shortening")?;

    let mut nodes = curve.nodes.clone();
    for (j, overlap) in junctions.iter().enumerate() {
        nodes[j + 1] = overlap.clamp(&solution.x[free + j * d..free + (j + 1) * d]);
    }
    polish(&mut nodes, &junctions);
    let shortened = PolygonalCurve::new(nodes, curve.boxes.clone());
    // Solver noise must never lengthen a curve that was already feasible.
    if shortened.length() > curve.length() && curve.is_safe(set) {
        return Ok(curve.clone());
    }
    Ok(shortened)
}

/// Refines solver output by damped Newton steps on the coordinates that are
/// off their junction bounds; the rest are snapped onto the bounds. Interior
/// point accuracy leaves segment directions off by about the square root of
/// the gap, which the insertion certificate would read as kinks.
fn polish(nodes: &mut [Vec<f64>], junctions: &[AxisBox]) {
    let n = nodes.len() - 1;
    let d = nodes[0].len();
    let length = |pts: &[Vec<f64>]| -> f64 { pts.windows(2).map(|w| distance(&w[0], &w[1])).sum() };
    let scale = length(nodes).max(f64::MIN_POSITIVE);
    let mut fixed = vec![vec![false; d]; n + 1];
    fixed[0] = vec![true; d];
    fixed[n] = vec![true; d];
    for (j, overlap) in junctions.iter().enumerate() {
        for a in 0..d {
            let y = &mut nodes[j + 1][a];
            let (lo, hi) = (overlap.lower()[a], overlap.upper()[a]);
            if (*y - lo).abs() <= SNAP_TOL * (1.0 + lo.abs()) {
                *y = lo;
                fixed[j + 1][a] = true;
            } else if (*y - hi).abs() <= SNAP_TOL * (1.0 + hi.abs()) {
                *y = hi;
                fixed[j + 1][a] = true;
            }
        }
    }
    let mut best = length(nodes);
    // A node next to a very short segment probably belongs on its neighbour.
    for j in 1..n {
        for other in [j - 1, j + 1] {
            if fixed[j].iter().all(|&f| f) || distance(&nodes[j], &nodes[other]) > COLLAPSE_TOL * scale {
                continue;
            }
            let z = junctions[j - 1].clamp(&nodes[other]);
            if z != nodes[other] {
                continue;
            }
            let previous = std::mem::replace(&mut nodes[j], z);
            let l = length(nodes);
            if l <= best {
                best = l;
                fixed[j] = vec![true; d];
            } else {
                nodes[j] = previous;
            }
        }
    }

    for _ in 0..POLISH_STEPS {
        let free: Vec<(usize, usize)> = (1..n)
            .flat_map(|j| (0..d).map(move |a| (j, a)))
            .filter(|&(j, a)| !fixed[j][a])
            .collect();
        if free.is_empty() {
            return;
        }
        let mut index = vec![vec![usize::MAX; d]; n + 1];
        for (v, &(j, a)) in free.iter().enumerate() {
            index[j][a] = v;
        }
        let m = free.len();
        let mut grad = nalgebra::DVector::<f64>::zeros(m);
        let mut hess = nalgebra::DMatrix::<f64>::zeros(m, m);
        for j in 1..=n {
            let e: Vec<f64> = (0..d).map(|a| nodes[j][a] - nodes[j - 1][a]).collect();
            let len = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len <= 1e-12 * scale {
                if (0..d).any(|a| index[j][a] != usize::MAX || index[j - 1][a] != usize::MAX) {
                    return;
                }
                continue;
            }
            // d|e|/dy_j = u, d|e|/dy_{j-1} = -u, Hessian (I - u u^T) / |e|.
            for (node, sign) in [(j, 1.0), (j - 1, -1.0)] {
                for a in 0..d {
                    let v = index[node][a];
                    if v == usize::MAX {
                        continue;
                    }
                    grad[v] += sign * e[a] / len;
                    for (other, sign2) in [(j, 1.0), (j - 1, -1.0)] {
                        for b in 0..d {
                            let w = index[other][b];
                            if w == usize::MAX {
                                continue;
                            }
                            let id = if a == b { 1.0 } else { 0.0 };
                            hess[(v, w)] += sign * sign2 * (id - e[a] * e[b] / (len * len)) / len;
                        }
                    }
                }
            }
        }
        if grad.amax() <= 1e-15 {
            return;
        }
        // Minimum-norm step: moving a node along a straight stretch of the
        // curve leaves the length unchanged, so the Hessian is singular there.
        let cutoff = 1e-10 * hess.amax();
        let Ok(step) = hess.svd(true, true).solve(&(-grad), cutoff) else {
            return;
        };
        // Longest step keeping every free coordinate inside its junction.
        let mut reach = 1.0;
        let mut blocking = None;
        for (v, &(j, a)) in free.iter().enumerate() {
            let overlap = &junctions[j - 1];
            let room = if step[v] > 0.0 {
                overlap.upper()[a] - nodes[j][a]
            } else if step[v] < 0.0 {
                overlap.lower()[a] - nodes[j][a]
            } else {
                continue;
            };
            let t = room / step[v];
            if t < reach {
                reach = t;
                blocking = Some((j, a));
            }
        }
        let mut trial = nodes.to_vec();
        let mut t = reach;
        let mut accepted = false;
        for _ in 0..30 {
            for (v, &(j, a)) in free.iter().enumerate() {
                let overlap = &junctions[j - 1];
                trial[j][a] = (nodes[j][a] + t * step[v]).clamp(overlap.lower()[a], overlap.upper()[a]);
            }
            if t == reach {
                if let Some((j, a)) = blocking {
                    let overlap = &junctions[j - 1];
                    trial[j][a] = if step[index[j][a]] > 0.0 { overlap.upper()[a] } else { overlap.lower()[a] };
                }
            }
            let l = length(&trial);
            if l <= best {
                accepted = true;
                best = l;
                if t == reach {
                    if let Some((j, a)) = blocking {
                        fixed[j][a] = true;
                    }
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return;
        }
        nodes.clone_from_slice(&trial);
    }
}

/// Minimizes the curve length with the box sequence fixed, then merges
/// coincident nodes; repeats until the sequence is stable, so the result is
/// an exact solve for its own (possibly shorter) sequence.
pub fn shorten_fixed_sequence(curve: &PolygonalCurve, set: &BoxSet, tol: f64) -> Result<PolygonalCurve> {
    let merge_tol = DEDUP_TOL * set.diameter();
    let mut current = curve.clone();
    current.collapse_repeats();
    loop {
        let mut next = solve_shortening(&current, set, tol)?;
        if !next.merge_coincident(set, merge_tol) {
            return Ok(next);
        }
        current = next;
    }
}

/// The shortest curve through a given box sequence, started from the centers
/// of consecutive overlaps. Deterministic, so equal sequences give
/// bit-identical curves.
pub fn curve_for_sequence(set: &BoxSet, sequence: &[usize], p_init: &[f64], p_term: &[f64]) -> Result<PolygonalCurve> {
    if sequence.is_empty() {
        return Err(PlanError::InvalidInput("empty box sequence".into()));
    }
    if let Some(&k) = sequence.iter().find(|&&k| k >= set.len()) {
        return Err(PlanError::InvalidInput(format!("box {k} out of range")));
    }
    if !set.get(sequence[0]).contains(p_init) || !set.get(sequence[sequence.len() - 1]).contains(p_term) {
        return Err(PlanError::InvalidInput("sequence does not cover the endpoints".into()));
    }
    let mut nodes = vec![p_init.to_vec()];
    for w in sequence.windows(2) {
        nodes.push(junction(set, w[0], w[1])?.center());
    }
    nodes.push(p_term.to_vec());
    shorten_fixed_sequence(&PolygonalCurve::new(nodes, sequence.to_vec()), set, TOL_SHORTENING)
}

/// Outcome of the dual check for splicing box `candidate` at node `node`.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionCertificate {
    pub node: usize,
    pub candidate: usize,
    /// Unit direction of the incoming segment.
    pub dir_in: Vec<f64>,
    /// Unit direction of the outgoing segment.
    pub dir_out: Vec<f64>,
    /// Elementwise lower limits on the multiplier (`-inf` where unconstrained).
    pub lower_limits: Vec<f64>,
    /// Elementwise upper limits on the multiplier (`+inf` where unconstrained).
    pub upper_limits: Vec<f64>,
    /// Minimum-norm multiplier within the limits.
    pub multiplier: Vec<f64>,
    /// Some lower limit exceeds its upper limit: no multiplier exists.
    pub limits_crossed: bool,
    pub insert: bool,
}

impl InsertionCertificate {
    pub fn multiplier_norm(&self) -> f64 {
        self.multiplier.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn is_active(value: f64, bound: f64, tol: f64) -> bool {
    (value - bound).abs() <= tol * (1.0 + bound.abs())
}

fn unit(from: &[f64], to: &[f64], node: usize) -> Result<Vec<f64>> {
    let len = distance(from, to);
    if len == 0.0 {
        return Err(PlanError::DegenerateDirection { node });
    }
    Ok(to.iter().zip(from).map(|(b, a)| (b - a) / len).collect())
}

/// Decides whether splicing box `k` between `s_j` and `s_{j+1}` at node
/// `y_j` strictly shortens the curve, without re-solving.
///
/// With the split points pinned at `y_j`, optimality of the split problem
/// needs a multiplier `λ`, `||λ|| <= 1`, whose entries are bounded by the
/// segment directions on every axis where a bound of the two new overlaps
/// is inactive. The minimum-norm such `λ` is a clamp of zero.
pub fn insertion_test(
    curve: &PolygonalCurve,
    j: usize,
    k: usize,
    set: &BoxSet,
    active_tol: f64,
) -> Result<InsertionCertificate> {
    let n = curve.num_segments();
    if j == 0 || j >= n {
        return Err(PlanError::InvalidInput(format!("node {j} is not interior to a curve with {n} segments")));
    }
    let y = &curve.nodes[j];
    if !set.get(k).contains(y) {
        return Err(PlanError::InvalidInput(format!("node {j} is not inside candidate box {k}")));
    }
    let dir_in = unit(&curve.nodes[j - 1], y, j)?;
    let dir_out = unit(y, &curve.nodes[j + 1], j)?;
    let first = junction(set, curve.boxes[j - 1], k)?;
    let second = junction(set, k, curve.boxes[j])?;

    let d = y.len();
    let mut lower_limits = vec![f64::NEG_INFINITY; d];
    let mut upper_limits = vec![f64::INFINITY; d];
    for i in 0..d {
        if !is_active(y[i], first.lower()[i], active_tol) {
            lower_limits[i] = lower_limits[i].max(dir_in[i]);
        }
        if !is_active(y[i], first.upper()[i], active_tol) {
            upper_limits[i] = upper_limits[i].min(dir_in[i]);
        }
        if !is_active(y[i], second.lower()[i], active_tol) {
            upper_limits[i] = upper_limits[i].min(dir_out[i]);
        }
        if !is_active(y[i], second.upper()[i], active_tol) {
            lower_limits[i] = lower_limits[i].max(dir_out[i]);
        }
    }
    let multiplier: Vec<f64> = lower_limits
        .iter()
        .zip(&upper_limits)
        .map(|(lo, hi)| hi.min(lo.max(0.0)))
        .collect();
    let limits_crossed = lower_limits
        .iter()
        .zip(&upper_limits)
        .any(|(lo, hi)| lo - hi > CROSSING_TOL);
    let norm = multiplier.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(InsertionCertificate {
        node: j,
        candidate: k,
        dir_in,
        dir_out,
        lower_limits,
        upper_limits,
        multiplier,
        limits_crossed,
        insert: limits_crossed || norm > 1.0 + NORM_TOL,
    })
}

/// Splices, at each interior node, the candidate box with the largest
/// certificate multiplier among those that prove a strict shortening.
/// The spliced curve duplicates the node, so it has the same length.
pub fn improve_sequence(curve: &PolygonalCurve, set: &BoxSet) -> Result<(PolygonalCurve, bool)> {
    let n = curve.num_segments();
    let mut splices: Vec<(usize, usize)> = Vec::new();
    for j in 1..n {
        let (before, after) = (curve.boxes[j - 1], curve.boxes[j]);
        let mut best: Option<(bool, f64, usize)> = None;
        for k in set.stab(&curve.nodes[j])? {
            if k == before || k == after {
                continue;
            }
            let cert = match insertion_test(curve, j, k, set, ACTIVE_TOL) {
                Ok(cert) => cert,
                Err(PlanError::DegenerateDirection { .. }) => break,
                Err(e) => return Err(e),
            };
            if !cert.insert {
                continue;
            }
            let key = (cert.limits_crossed, cert.multiplier_norm(), k);
            let better = match best {
                None => true,
                Some((crossed, norm, _)) => (key.0, key.1) > (crossed, norm),
            };
            if better {
                best = Some(key);
            }
        }
        if let Some((_, _, k)) = best {
            splices.push((j, k));
        }
    }
    if splices.is_empty() {
        return Ok((curve.clone(), false));
    }
    let mut nodes = curve.nodes.clone();
    let mut boxes = curve.boxes.clone();
    for &(j, k) in splices.iter().rev() {
        boxes.insert(j, k);
        nodes.insert(j, nodes[j].clone());
    }
    Ok((PolygonalCurve::new(nodes, boxes), true))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolygonalStats {
    /// Number of fixed-sequence shortening passes.
    pub shorten_passes: usize,
    /// Passes of the sequence update that spliced at least one box.
    pub insertion_rounds: usize,
    /// Total boxes spliced into the sequence.
    pub boxes_inserted: usize,
    /// Curve length after every accepted step.
    pub length_trace: Vec<f64>,
}

/// Runs the polygonal phase. `None` certifies that no safe path exists.
pub fn polygonal_phase(
    graph: &LineGraph,
    set: &BoxSet,
    p_init: &[f64],
    p_term: &[f64],
) -> Result<Option<(PolygonalCurve, PolygonalStats)>> {
    let Some(start) = graph.shortest_box_path(set, p_init, p_term)? else {
        return Ok(None);
    };
    let cap = 2 * set.len() + 10;
    let mut stats = PolygonalStats::default();
    stats.length_trace.push(start.length());

    let mut curve = shorten_fixed_sequence(&start, set, TOL_SHORTENING)?;
    stats.shorten_passes = 1;
    stats.length_trace.push(curve.length());
    loop {
        let (spliced, inserted) = improve_sequence(&curve, set)?;
        if !inserted {
            break;
        }
        let candidate = shorten_fixed_sequence(&spliced, set, TOL_SHORTENING)?;
        stats.shorten_passes += 1;
        if candidate.length() >= curve.length() * (1.0 - 1e-9) {
            // The certificate fired inside the solver's accuracy band.
            break;
        }
        stats.insertion_rounds += 1;
        stats.boxes_inserted += spliced.num_segments() - curve.num_segments();
        stats.length_trace.push(candidate.length());
        curve = candidate;
        if stats.shorten_passes > cap {
            return Err(PlanError::IterationCap { cap });
        }
    }
    Ok(Some((curve, stats)))
}
