//! Bézier curves in the Bernstein basis.

use crate::error::{PlanError, Result};

/// Exact binomial coefficient; exact in `u64` for `n <= 62`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Bernstein polynomial `n` of degree `degree` on `[a, b]`, evaluated at `t`.
pub fn bernstein(degree: usize, n: usize, a: f64, b: f64, t: f64) -> Result<f64> {
    if b <= a {
        return Err(PlanError::InvalidInput(format!("empty time interval [{a}, {b}]")));
    }
    if n > degree {
        return Err(PlanError::InvalidInput(format!("index {n} exceeds degree {degree}")));
    }
    Ok(bernstein_unchecked(degree, n, a, b, t))
}

fn bernstein_unchecked(degree: usize, n: usize, a: f64, b: f64, t: f64) -> f64 {
    let s = (t - a) / (b - a);
    let r = (b - t) / (b - a);
    binomial(degree, n) as f64 * s.powi(n as i32) * r.powi((degree - n) as i32)
}

/// The quadratic form `Q` with `∫_a^b ||γ(t)||² dt = (b - a) Q(γ_0, …, γ_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QForm {
    degree: usize,
    // Row-major (M+1) x (M+1).
    entries: Vec<f64>,
}

impl QForm {
    pub fn new(degree: usize) -> Self {
        let size = degree + 1;
        let scale = 1.0 / (2 * degree + 1) as f64;
        let mut entries = vec![0.0; size * size];
        for m in 0..size {
            for n in 0..size {
                let num = binomial(degree, m) as f64 * binomial(degree, n) as f64;
                entries[m * size + n] = scale * num / binomial(2 * degree, m + n) as f64;
            }
        }
        Self { degree, entries }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.degree + 1
    }

    pub fn entry(&self, m: usize, n: usize) -> f64 {
        self.entries[m * self.size() + n]
    }

    /// `Q(γ_0, …, γ_M) = Σ_{m,n} Q_{mn} γ_mᵀ γ_n`.
    pub fn value(&self, points: &[Vec<f64>]) -> f64 {
        let size = self.size();
        assert_eq!(points.len(), size, "control point count must be degree + 1");
        let mut total = 0.0;
        for m in 0..size {
            for n in 0..size {
                let dot: f64 = points[m].iter().zip(&points[n]).map(|(x, y)| x * y).sum();
                total += self.entry(m, n) * dot;
            }
        }
        total
    }

    /// Lower-triangular `L` (row-major) with `Q = L Lᵀ`.
    ///
    /// `Q` is the Gram matrix of the Bernstein basis, hence positive definite.
    pub fn cholesky(&self) -> Vec<f64> {
        let size = self.size();
        let mut l = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                let mut sum = self.entry(i, j);
                for k in 0..j {
                    sum -= l[i * size + k] * l[j * size + k];
                }
                if i == j {
                    l[i * size + i] = sum.max(0.0).sqrt();
                } else {
                    let pivot = l[j * size + j];
                    l[i * size + j] = if pivot > 0.0 { sum / pivot } else { 0.0 };
                }
            }
        }
        l
    }
}

/// A Bézier curve on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    start: f64,
    end: f64,
    points: Vec<Vec<f64>>,
}

impl BezierCurve {
    pub fn new(start: f64, end: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(end > start) {
            return Err(PlanError::InvalidInput(format!("empty time interval [{start}, {end}]")));
        }
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| PlanError::InvalidInput("a Bézier curve needs control points".into()))?;
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(PlanError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { start, end, points })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if t < self.start || t > self.end {
            return Err(PlanError::InvalidInput(format!(
                "time {t} outside [{}, {}]",
                self.start, self.end
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    /// Bernstein-form evaluation without the domain check.
    pub(crate) fn eval_unchecked(&self, t: f64) -> Vec<f64> {
        let degree = self.degree();
        if t == self.start {
            return self.points[0].clone();
        }
        if t == self.end {
            return self.points[degree].clone();
        }
        let mut out = vec![0.0; self.dim()];
        for (n, p) in self.points.iter().enumerate() {
            let beta = bernstein_unchecked(degree, n, self.start, self.end, t);
            for (o, x) in out.iter_mut().zip(p) {
                *o += beta * x;
            }
        }
        out
    }

    pub fn derivative(&self) -> Result<BezierCurve> {
        let degree = self.degree();
        if degree == 0 {
            return Err(PlanError::InvalidInput("cannot differentiate a degree-0 curve".into()));
        }
        let scale = degree as f64 / self.duration();
        let points = self
            .points
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| scale * (b - a)).collect())
            .collect();
        Ok(BezierCurve {
            start: self.start,
            end: self.end,
            points,
        })
    }

    /// `∫ ||γ(t)||² dt` over the curve's domain.
    pub fn squared_l2(&self) -> f64 {
        self.duration() * QForm::new(self.degree()).value(&self.points)
    }
}
