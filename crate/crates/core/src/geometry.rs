//! Axis-aligned boxes, pairwise intersection enumeration and stabbing queries.
//!
//! Boxes are closed: touching faces, edges or corners count as an
//! intersection. Comparisons are exact on the input coordinates.

use crate::error::{PlanError, Result};

/// A closed axis-aligned box `{x : lower <= x <= upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(PlanError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(PlanError::InvalidInput("box dimension must be at least 1".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(PlanError::InvalidInput(format!("non-finite bound on axis {i}")));
            }
            if l > u {
                return Err(PlanError::InvalidInput(format!(
                    "lower bound {l} exceeds upper bound {u} on axis {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| *l <= *xi && *xi <= *u)
    }

    /// Nearest point of the box (elementwise clamp).
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(xi, (l, u))| xi.max(*l).min(*u))
            .collect()
    }

    /// Largest elementwise amount by which `x` leaves the box (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn intersection(&self, other: &AxisBox) -> Result<Option<AxisBox>> {
        box_intersection(self, other)
    }

    fn overlaps_from_axis(&self, other: &AxisBox, start: usize) -> bool {
        (start..self.dim()).all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }
}

/// Intersection of two boxes, or `None` when they are disjoint.
pub fn box_intersection(a: &AxisBox, b: &AxisBox) -> Result<Option<AxisBox>> {
    if a.dim() != b.dim() {
        return Err(PlanError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let lower: Vec<f64> = a.lower.iter().zip(&b.lower).map(|(x, y)| x.max(*y)).collect();
    let upper: Vec<f64> = a.upper.iter().zip(&b.upper).map(|(x, y)| x.min(*y)).collect();
    if lower.iter().zip(&upper).all(|(l, u)| l <= u) {
        Ok(Some(AxisBox { lower, upper }))
    } else {
        Ok(None)
    }
}

/// A pair of intersecting boxes `(first, second)` with `first < second`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPair {
    pub first: usize,
    pub second: usize,
    pub overlap: AxisBox,
}

/// The safe set: an immutable collection of boxes sharing one dimension,
/// with a sweep index sorted along axis 0.
#[derive(Debug, Clone)]
pub struct BoxSet {
    boxes: Vec<AxisBox>,
    dim: usize,
    // Box indices ordered by (lower[0], index).
    sweep_order: Vec<usize>,
    sweep_lower: Vec<f64>,
    max_extent: f64,
}

impl BoxSet {
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| PlanError::InvalidInput("a box set needs at least one box".into()))?;
        let dim = first.dim();
        for (index, b) in boxes.iter().enumerate() {
            if b.dim() != dim {
                return Err(PlanError::InvalidBox {
                    index,
                    reason: format!("dimension {} differs from {}", b.dim(), dim),
                });
            }
        }
        let mut sweep_order: Vec<usize> = (0..boxes.len()).collect();
        sweep_order.sort_by(|&a, &b| boxes[a].lower[0].total_cmp(&boxes[b].lower[0]).then(a.cmp(&b)));
        let sweep_lower = sweep_order.iter().map(|&k| boxes[k].lower[0]).collect();
        let max_extent = boxes
            .iter()
            .map(|b| b.upper[0] - b.lower[0])
            .fold(0.0, f64::max);
        Ok(Self {
            boxes,
            dim,
            sweep_order,
            sweep_lower,
            max_extent,
        })
    }

    /// Builds a box set from row-major `K x d` bound arrays.
    pub fn from_bounds(lower: &[Vec<f64>], upper: &[Vec<f64>]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(PlanError::InvalidInput(format!(
                "{} lower rows but {} upper rows",
                lower.len(),
                upper.len()
            )));
        }
        let boxes = lower
            .iter()
            .zip(upper)
            .enumerate()
            .map(|(index, (l, u))| {
                AxisBox::new(l.clone(), u.clone()).map_err(|e| PlanError::InvalidBox {
                    index,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(boxes)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn get(&self, k: usize) -> &AxisBox {
        &self.boxes[k]
    }

    /// Length of the diagonal of the bounding box of the whole set.
    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let lo = self.boxes.iter().map(|b| b.lower[i]).fold(f64::INFINITY, f64::min);
                let hi = self.boxes.iter().map(|b| b.upper[i]).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// All intersecting pairs, ordered lexicographically by index.
    ///
    /// Sort-and-sweep along axis 0: boxes enter in order of their lower
    /// bound and are compared against the boxes whose extent along the axis
    /// still covers the entry coordinate.
    pub fn enumerate_intersections(&self) -> Vec<BoxPair> {
        let mut active: Vec<usize> = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for &k in &self.sweep_order {
            let b = &self.boxes[k];
            let entry = b.lower[0];
            active.retain(|&a| self.boxes[a].upper[0] >= entry);
            for &a in &active {
                if self.boxes[a].overlaps_from_axis(b, 1) {
                    pairs.push((a.min(k), a.max(k)));
                }
            }
            active.push(k);
        }
        pairs.sort_unstable();
        pairs
            .into_iter()
            .map(|(first, second)| {
                let overlap = box_intersection(&self.boxes[first], &self.boxes[second])
                    .expect("boxes share a dimension")
                    .expect("sweep reported an overlapping pair");
                BoxPair {
                    first,
                    second,
                    overlap,
                }
            })
            .collect()
    }

    /// Sorted indices of all boxes containing `x` (boundary included).
    pub fn stab(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dim {
            return Err(PlanError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let end = self.sweep_lower.partition_point(|&l| l <= x[0]);
        let floor = x[0] - self.max_extent;
        let mut hits: Vec<usize> = self.sweep_order[..end]
            .iter()
            .rev()
            .take_while(|&&k| self.boxes[k].lower[0] >= floor)
            .copied()
            .filter(|&k| self.boxes[k].contains(x))
            .collect();
        hits.sort_unstable();
        Ok(hits)
    }
}
