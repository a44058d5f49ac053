//! Lowering of [`ConicProblem`] onto the Clarabel interior-point solver.
//!
//! Clarabel solves `min qᵀx s.t. Ax + s = b, s ∈ K`, so each block contributes rows
//! with `s = (affine expression)`, i.e. `A = −coef`, `b = constant`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{AffineExpr, Block, ConicProblem, SolveOutcome, SolveStatus};
use crate::error::{Error, Result};

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Rows {
    /// Appends rows so that the slack equals `exprs` and tags them with `cone`.
    fn push_slack(&mut self, exprs: &[AffineExpr], cone: SupportedConeT<f64>) {
        for e in exprs {
            let row = self.b.len();
            for &(var, coef) in &e.compacted().terms {
                self.i.push(row);
                self.j.push(var.0);
                self.v.push(-coef);
            }
            self.b.push(e.constant);
        }
        self.cones.push(cone);
    }
}

fn lower(problem: &ConicProblem) -> Rows {
    use SupportedConeT::*;
    let mut rows = Rows { i: vec![], j: vec![], v: vec![], b: vec![], cones: vec![] };
    for c in &problem.constraints {
        match &c.block {
            Block::Eq { expr } => rows.push_slack(&[expr.scaled(-1.0)], ZeroConeT(1)),
            Block::Le { expr } => rows.push_slack(&[expr.scaled(-1.0)], NonnegativeConeT(1)),
            Block::Soc { t, x } => {
                let mut exprs = vec![t.clone()];
                exprs.extend(x.iter().cloned());
                rows.push_slack(&exprs, SecondOrderConeT(exprs.len()));
            }
            Block::RotatedSoc { u, v, x } => {
                // ‖x‖² <= uv  ⟺  ‖(2x, u − v)‖ <= u + v
                let mut exprs = vec![u.clone().plus(v), u.clone().minus(v)];
                exprs.extend(x.iter().map(|e| e.scaled(2.0)));
                rows.push_slack(&exprs, SecondOrderConeT(exprs.len()));
            }
            Block::Exp { x, y, z } => {
                // Clarabel orders the exponential cone as (z, y, x): y·exp(z/y) <= x
                rows.push_slack(&[z.clone(), y.clone(), x.clone()], ExponentialConeT());
            }
        }
    }
    rows
}

pub(super) fn solve(problem: &ConicProblem, tolerance: f64) -> Result<SolveOutcome> {
    let n = problem.n_vars();
    let rows = lower(problem);
    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let p = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(var, coef) in &problem.objective.terms {
        q[var.0] += coef;
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(tolerance)
        .tol_gap_abs(tolerance)
        .tol_gap_rel(tolerance)
        .tol_infeas_abs(tolerance)
        .tol_infeas_rel(tolerance)
        .max_iter(400)
        .build()
        .map_err(|e| Error::NumericalFailure(format!("solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &rows.cones, settings)
        .map_err(|e| Error::NumericalFailure(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::AlmostSolved
        | SolverStatus::MaxIterations
        | SolverStatus::MaxTime
        | SolverStatus::InsufficientProgress => SolveStatus::MaxIterations,
        _ => SolveStatus::NumericalFailure,
    };
    let primal = matches!(status, SolveStatus::Optimal | SolveStatus::MaxIterations).then(|| sol.x.clone());
    let (objective, residual) = match &primal {
        Some(x) => (problem.objective_value(x), problem.residual(x)),
        None => (f64::NAN, 0.0),
    };
    Ok(SolveOutcome {
        status,
        primal,
        objective,
        residual,
        iterations: sol.iterations,
    })
}
