//! Brute-force reference planners for small scenes.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::conic::TOL_SHORTENING;
use crate::error::{PlanError, Result};
use crate::geometry::BoxSet;
use crate::polygonal::{curve_for_sequence, solve_shortening, PolygonalCurve};
use crate::smooth::{smooth_phase, PlanningQuery, SmoothParams};

pub const MAX_BOXES: usize = 8;
pub const MAX_SEQUENCE_LENGTH: usize = 10;

/// Best plan over all enumerated box sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEnumeration {
    pub max_length: usize,
    /// Number of sequences satisfying the covering and overlap conditions.
    pub feasible_sequences: usize,
    /// Distinct shortened curves the smooth phase was run on.
    pub distinct_curves: usize,
    /// Sequences whose smooth phase failed numerically.
    pub failures: usize,
    pub best_cost: f64,
    pub best_sequence: Vec<usize>,
}

/// All sequences of length at most `max_length`, without immediate repeats,
/// that start in a box holding `p_init`, end in one holding `p_term`, and
/// whose consecutive boxes intersect.
pub fn feasible_sequences(set: &BoxSet, p_init: &[f64], p_term: &[f64], max_length: usize) -> Result<Vec<Vec<usize>>> {
    let mut adjacent = vec![Vec::new(); set.len()];
    for pair in set.enumerate_intersections() {
        adjacent[pair.first].push(pair.second);
        adjacent[pair.second].push(pair.first);
    }
    for list in &mut adjacent {
        list.sort_unstable();
    }
    let starts = set.stab(p_init)?;
    let ends = set.stab(p_term)?;
    let mut is_end = vec![false; set.len()];
    for &k in &ends {
        is_end[k] = true;
    }

    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(max_length);
    fn walk(adjacent: &[Vec<usize>], is_end: &[bool], max_length: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *stack.last().unwrap();
        if is_end[last] {
            out.push(stack.clone());
        }
        if stack.len() == max_length {
            return;
        }
        for &next in &adjacent[last] {
            stack.push(next);
            walk(adjacent, is_end, max_length, stack, out);
            stack.pop();
        }
    }
    for &s in &starts {
        stack.push(s);
        walk(&adjacent, &is_end, max_length, &mut stack, &mut out);
        stack.pop();
    }
    out.sort();
    Ok(out)
}

/// Runs the smooth phase on the shortest curve of every feasible sequence
/// and returns the cheapest. `None` means no sequence covers the endpoints.
pub fn enumerate_plan(
    set: &BoxSet,
    query: &PlanningQuery,
    params: &SmoothParams,
    max_length: Option<usize>,
) -> Result<Option<SequenceEnumeration>> {
    query.validate(set.dim())?;
    let max_length = max_length.unwrap_or(set.len() + 2);
    if set.len() > MAX_BOXES || max_length > MAX_SEQUENCE_LENGTH {
        return Err(PlanError::GuardExceeded(format!(
            "enumeration limited to {MAX_BOXES} boxes and length {MAX_SEQUENCE_LENGTH}, got {} and {max_length}",
            set.len()
        )));
    }
    let sequences = feasible_sequences(set, &query.p_init, &query.p_term, max_length)?;
    if sequences.is_empty() {
        return Ok(None);
    }

    let curves: Vec<Result<PolygonalCurve>> = sequences
        .par_iter()
        .map(|seq| curve_for_sequence(set, seq, &query.p_init, &query.p_term))
        .collect();
    // Many sequences shorten to the same curve; smooth each curve once.
    let mut distinct: BTreeMap<Vec<u64>, PolygonalCurve> = BTreeMap::new();
    for curve in curves.iter().flatten() {
        distinct.entry(curve_key(curve)).or_insert_with(|| curve.clone());
    }
    let costs: BTreeMap<Vec<u64>, Option<f64>> = distinct
        .into_par_iter()
        .map(|(key, curve)| {
            let cost = match smooth_phase(&curve, query, set, params) {
                Ok(outcome) => Some(outcome.cost),
                Err(e) => {
                    log::debug!("oracle smooth phase failed on {:?}: {e}", curve.boxes());
                    None
                }
            };
            (key, cost)
        })
        .collect();

    let mut failures = 0;
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for (seq, curve) in sequences.iter().zip(&curves) {
        let cost = match curve {
            Ok(curve) => costs[&curve_key(curve)],
            Err(_) => None,
        };
        let Some(cost) = cost else {
            failures += 1;
            continue;
        };
        // Sequences are sorted, so strict comparison keeps the
        // lexicographically smallest among equal costs.
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, seq));
        }
    }
    let Some((best_cost, best_sequence)) = best else {
        return Err(PlanError::Solver {
            status: "oracle".into(),
            detail: "smooth phase failed on every feasible sequence".into(),
        });
    };
    Ok(Some(SequenceEnumeration {
        max_length,
        feasible_sequences: sequences.len(),
        distinct_curves: costs.len(),
        failures,
        best_cost,
        best_sequence: best_sequence.clone(),
    }))
}

fn curve_key(curve: &PolygonalCurve) -> Vec<u64> {
    curve
        .boxes()
        .iter()
        .map(|&k| k as u64)
        .chain(curve.nodes().iter().flatten().map(|x| x.to_bits()))
        .collect()
}

/// Length decrease from splicing box `k` at interior node `j`, both
/// sequences solved to the same accuracy.
pub fn resolve_with_insertion(curve: &PolygonalCurve, j: usize, k: usize, set: &BoxSet) -> Result<f64> {
    let n = curve.num_segments();
    if j == 0 || j >= n {
        return Err(PlanError::InvalidInput(format!("node {j} is not interior to a curve with {n} segments")));
    }
    if k >= set.len() || !set.get(k).contains(&curve.nodes()[j]) {
        return Err(PlanError::InvalidInput(format!("node {j} is not inside box {k}")));
    }
    let mut nodes = curve.nodes().to_vec();
    let mut boxes = curve.boxes().to_vec();
    nodes.insert(j, nodes[j].clone());
    boxes.insert(j, k);
    let spliced = solve_shortening(&PolygonalCurve::new(nodes, boxes), set, TOL_SHORTENING)?;
    let original = solve_shortening(curve, set, TOL_SHORTENING)?;
    Ok(original.length().min(curve.length()) - spliced.length())
}
