//! Convex conic problems: linear equalities, variable bounds, linear
//! inequalities, second-order cones and a convex quadratic objective.
//!
//! Problems are assembled with [`ConicProblem`] and handed to the embedded
//! Clarabel interior-point backend. Nothing here is specific to path
//! planning; the planner modules only speak this contract.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{PlanError, Result};

/// Default tolerance for representative-point optimization.
pub const TOL_REPRESENTATIVE: f64 = 1e-4;
/// Default tolerance for fixed-sequence curve shortening.
pub const TOL_SHORTENING: f64 = 1e-7;
/// Default tolerance for the projection and tangent problems.
pub const TOL_SMOOTH: f64 = 1e-6;

/// Affine expression `sum(coef * x[var]) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, index: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
        self
    }

    pub fn plus(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// Banded optimal-control structure: `stages` consecutive blocks of
/// `span` variables each. Informational; the sparse backend exploits the
/// band automatically through its fill-reducing ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageHint {
    pub stages: usize,
    pub span: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBound {
    pub var: usize,
    pub lower: f64,
    pub upper: f64,
}

/// A convex conic program
///
/// ```text
/// minimize    c'x + x'Wx
/// subject to  eq_r(x) = 0,  lower <= x_i <= upper,  ineq_r(x) >= 0,
///             cone_r[0](x) >= || cone_r[1..](x) ||_2
/// ```
///
/// with `W` symmetric positive semidefinite.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    num_vars: usize,
    linear: Vec<f64>,
    // Upper-triangular entries of 2W, keyed (row, col) with row <= col.
    hessian: BTreeMap<(usize, usize), f64>,
    equalities: Vec<LinExpr>,
    bounds: Vec<VarBound>,
    inequalities: Vec<LinExpr>,
    cones: Vec<Vec<LinExpr>>,
    hint: Option<StageHint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `count` variables and returns the index of the first one.
    pub fn add_variables(&mut self, count: usize) -> usize {
        let start = self.num_vars;
        self.num_vars += count;
        self.linear.resize(self.num_vars, 0.0);
        start
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_linear_cost(&mut self, var: usize, coef: f64) {
        self.linear[var] += coef;
    }

    /// Adds `weight * x[i] * x[j]` to the objective.
    pub fn add_quadratic(&mut self, i: usize, j: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let value = if i == j { 2.0 * weight } else { weight };
        *self.hessian.entry((r, c)).or_insert(0.0) += value;
    }

    pub fn add_equality(&mut self, expr: LinExpr) {
        self.equalities.push(expr);
    }

    /// Bounds a variable; infinite sides are dropped.
    pub fn add_bound(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds.push(VarBound { var, lower, upper });
    }

    /// Adds `expr >= 0`.
    pub fn add_inequality(&mut self, expr: LinExpr) {
        self.inequalities.push(expr);
    }

    /// Adds `rows[0] >= ||rows[1..]||_2`.
    pub fn add_cone(&mut self, rows: Vec<LinExpr>) {
        assert!(!rows.is_empty(), "a second-order cone needs a leading row");
        self.cones.push(rows);
    }

    pub fn set_stage_hint(&mut self, hint: StageHint) {
        self.hint = Some(hint);
    }

    pub fn stage_hint(&self) -> Option<StageHint> {
        self.hint
    }

    pub fn equalities(&self) -> &[LinExpr] {
        &self.equalities
    }

    pub fn bounds(&self) -> &[VarBound] {
        &self.bounds
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let linear: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self
            .hessian
            .iter()
            .map(|(&(r, c), &h)| if r == c { 0.5 * h * x[r] * x[r] } else { h * x[r] * x[c] })
            .sum();
        linear + quad
    }

    /// Largest absolute constraint violation of `x`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for b in &self.bounds {
            worst = worst.max(b.lower - x[b.var]).max(x[b.var] - b.upper);
        }
        for e in &self.inequalities {
            worst = worst.max(-e.eval(x));
        }
        for cone in &self.cones {
            let head = cone[0].eval(x);
            let tail = cone[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(tail - head);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let in_range = |e: &LinExpr| e.terms.iter().all(|&(i, c)| i < self.num_vars && c.is_finite());
        let ok = self.equalities.iter().all(in_range)
            && self.inequalities.iter().all(in_range)
            && self.cones.iter().flatten().all(in_range)
            && self.bounds.iter().all(|b| b.var < self.num_vars && b.lower <= b.upper)
            && self.hessian.keys().all(|&(_, c)| c < self.num_vars)
            && self.linear.iter().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidInput("malformed conic problem".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// One multiplier per equality row.
    pub equality_duals: Vec<f64>,
    /// `(lower, upper)` multipliers per bound; zero for infinite sides.
    pub bound_duals: Vec<(f64, f64)>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
    pub backend_status: String,
}

impl ConicSolution {
    /// Converts a non-optimal outcome into an error carrying diagnostics.
    pub fn require_optimal(self, what: &str) -> Result<Self> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(PlanError::Solver {
                status: self.backend_status.clone(),
                detail: format!(
                    "{what}: primal residual {:.3e}, dual residual {:.3e}, {} iterations",
                    self.primal_residual, self.dual_residual, self.iterations
                ),
            })
        }
    }
}

/// Solves `problem` to optimality tolerance `tol`.
pub fn solve(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    run(problem, tol, tol.min(1e-9), true)
}

/// As [`solve`], but feasibility is only held to `tol` and KKT solves are
/// not refined. For large approximate problems whose result is projected
/// afterwards.
pub fn solve_loose(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    run(problem, tol, tol, false)
}

fn run(problem: &ConicProblem, tol: f64, tol_feas: f64, refine: bool) -> Result<ConicSolution> {
    problem.validate()?;
    let n = problem.num_vars;

    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut push_row = |expr: &LinExpr, rhs: &mut Vec<f64>| {
        let r = rhs.len();
        for &(i, c) in &expr.terms {
            rows.push(r);
            cols.push(i);
            vals.push(-c);
        }
        rhs.push(expr.constant);
    };

    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    for e in &problem.equalities {
        push_row(e, &mut rhs);
    }
    if !problem.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(problem.equalities.len()));
    }

    // (row of lower side, row of upper side) per bound.
    let mut bound_rows: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(problem.bounds.len());
    let nonneg_start = rhs.len();
    for b in &problem.bounds {
        let lo = b.lower.is_finite().then(|| {
            let r = rhs.len();
            push_row(&LinExpr::var(b.var).plus(-b.lower), &mut rhs);
            r
        });
        let hi = b.upper.is_finite().then(|| {
            let r = rhs.len();
            push_row(&LinExpr::constant(b.upper).term(b.var, -1.0), &mut rhs);
            r
        });
        bound_rows.push((lo, hi));
    }
    for e in &problem.inequalities {
        push_row(e, &mut rhs);
    }
    if rhs.len() > nonneg_start {
        cones.push(SupportedConeT::NonnegativeConeT(rhs.len() - nonneg_start));
    }
    for cone in &problem.cones {
        for e in cone {
            push_row(e, &mut rhs);
        }
        if cone.len() == 1 {
            cones.push(SupportedConeT::NonnegativeConeT(1));
        } else {
            cones.push(SupportedConeT::SecondOrderConeT(cone.len()));
        }
    }

    let m = rhs.len();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let (pr, pc, pv): (Vec<usize>, Vec<usize>, Vec<f64>) = problem
        .hessian
        .iter()
        .map(|(&(r, c), &v)| (r, c, v))
        .fold((Vec::new(), Vec::new(), Vec::new()), |(mut r, mut c, mut v), (ri, ci, vi)| {
            r.push(ri);
            c.push(ci);
            v.push(vi);
            (r, c, v)
        });
    let p = CscMatrix::new_from_triplets(n, n, pr, pc, pv);

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol_feas)
        .max_iter(200)
        .max_threads(1)
        .iterative_refinement_enable(refine)
        .build()
        .map_err(|e| PlanError::Solver {
            status: "settings".into(),
            detail: e.to_string(),
        })?;

    let mut solver = DefaultSolver::new(&p, &problem.linear, &a, &rhs, &cones, settings).map_err(|e| {
        PlanError::Solver {
            status: "setup".into(),
            detail: format!("{e:?}"),
        }
    })?;
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        _ => SolveStatus::NumericalFailure,
    };
    let x = sol.x.clone();
    let equality_duals = sol.z[..problem.equalities.len()].to_vec();
    let bound_duals = bound_rows
        .iter()
        .map(|&(lo, hi)| (lo.map_or(0.0, |r| sol.z[r]), hi.map_or(0.0, |r| sol.z[r])))
        .collect();
    let objective = problem.objective(&x);
    let primal_residual = problem.primal_violation(&x);
    Ok(ConicSolution {
        status,
        x,
        equality_duals,
        bound_duals,
        objective,
        primal_residual,
        dual_residual: sol.r_dual,
        iterations: sol.iterations,
        backend_status: format!("{:?}", sol.status),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norm_with_fixed_point() {
        // min t s.t. t >= ||x||, x = c
        let c = [3.0, -4.0];
        let mut p = ConicProblem::new();
        let t = p.add_variables(1);
        let x = p.add_variables(2);
        p.add_linear_cost(t, 1.0);
        for i in 0..2 {
            p.add_equality(LinExpr::var(x + i).plus(-c[i]));
        }
        p.add_cone(vec![LinExpr::var(t), LinExpr::var(x), LinExpr::var(x + 1)]);
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_relative_eq!(s.objective, 5.0, epsilon = 1e-6);
        assert_relative_eq!(s.x[x], 3.0, epsilon = 1e-6);
        assert_relative_eq!(s.x[x + 1], -4.0, epsilon = 1e-6);
    }

    #[test]
    fn active_lower_bound() {
        let mut p = ConicProblem::new();
        let x = p.add_variables(1);
        p.add_quadratic(x, x, 1.0);
        p.add_bound(x, 1.0, 2.0);
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_relative_eq!(s.x[x], 1.0, epsilon = 1e-6);
        assert_relative_eq!(s.objective, 1.0, epsilon = 1e-6);
        // d/dx x^2 = 2 at x = 1, balanced by the lower-bound multiplier.
        assert_relative_eq!(s.bound_duals[0].0, 2.0, epsilon = 1e-5);
        assert!(s.bound_duals[0].1.abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = ConicProblem::new();
        let x = p.add_variables(1);
        p.add_linear_cost(x, 1.0);
        p.add_bound(x, 0.0, 1.0);
        p.add_equality(LinExpr::var(x).plus(-3.0));
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.require_optimal("test").is_err());
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let mut p = ConicProblem::new();
        p.add_variables(1);
        p.add_equality(LinExpr::var(4));
        assert!(solve(&p, 1e-8).is_err());
    }
}
