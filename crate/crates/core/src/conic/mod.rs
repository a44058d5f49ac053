//! Canonical convex subproblems: linear objective, linear rows, second-order cones,
//! rotated second-order cones and exponential cones over a real decision vector.
//!
//! Complex precoders are stored as interleaved `(re, im)` coordinate pairs. Both
//! optimizers lower each iteration into a [`ConicProblem`] and go through [`ConicProblem::solve`].

mod backend;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Index of a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub usize);

/// `Σ coef_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn sum_vars(vars: impl IntoIterator<Item = Var>) -> Self {
        Self {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn add_term(mut self, v: Var, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: &AffineExpr) -> Self {
        self.plus(&other.scaled(-1.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }

    /// Largest absolute contribution of a single term, used to scale residuals.
    fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| (c * x[v.0]).abs())
            .fold(self.constant.abs(), f64::max)
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compacted(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(Var, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Self { terms: out, constant: self.constant }
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0 .0).max()
    }
}

/// Complex vector variable laid out as `[re_0, im_0, re_1, im_1, …]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexVar {
    pub start: usize,
    pub len: usize,
}

impl ComplexVar {
    pub fn re(&self, i: usize) -> Var {
        Var(self.start + 2 * i)
    }

    pub fn im(&self, i: usize) -> Var {
        Var(self.start + 2 * i + 1)
    }

    /// All real coordinates, in storage order.
    pub fn coords(&self) -> impl Iterator<Item = Var> {
        let s = self.start;
        (0..2 * self.len).map(move |i| Var(s + i))
    }

    /// Real and imaginary parts of `hᴴ p` as affine expressions.
    pub fn inner_with(&self, h: &[Complex<f64>]) -> (AffineExpr, AffineExpr) {
        assert_eq!(h.len(), self.len, "channel length differs from precoder length");
        let mut re = AffineExpr::default();
        let mut im = AffineExpr::default();
        // conj(h)(x + jy) = (h_re x + h_im y) + j(h_re y − h_im x)
        for (i, hi) in h.iter().enumerate() {
            re.terms.push((self.re(i), hi.re));
            re.terms.push((self.im(i), hi.im));
            im.terms.push((self.re(i), -hi.im));
            im.terms.push((self.im(i), hi.re));
        }
        (re, im)
    }

    /// `Re{aᴴ p}` for a fixed complex vector `a`.
    pub fn real_inner_with(&self, a: &[Complex<f64>]) -> AffineExpr {
        self.inner_with(a).0
    }

    pub fn value(&self, x: &[f64]) -> Vec<Complex<f64>> {
        (0..self.len)
            .map(|i| Complex::new(x[self.re(i).0], x[self.im(i).0]))
            .collect()
    }
}

/// `Σ_t |h_tᴴ p_t|² + constant` over complex vector variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexQuadForm {
    pub terms: Vec<(Vec<Complex<f64>>, ComplexVar)>,
    pub constant: f64,
}

impl ComplexQuadForm {
    pub fn new(constant: f64) -> Self {
        Self { terms: Vec::new(), constant }
    }

    pub fn with_term(mut self, h: &[Complex<f64>], p: ComplexVar) -> Self {
        self.terms.push((h.to_vec(), p));
        self
    }

    /// Adds `pᴴ Ψ p` for a Hermitian positive-semidefinite `Ψ`, via `Ψ = Σ_r l_r l_rᴴ`.
    pub fn with_hermitian(mut self, psi: &[Vec<Complex<f64>>], p: ComplexVar) -> Self {
        for l in hermitian_factor(psi) {
            self.terms.push((l, p));
        }
        self
    }

    /// Real coordinates `[Re hᴴp, Im hᴴp, …]` whose squared norm is the quadratic part.
    fn coordinates(&self) -> Vec<AffineExpr> {
        self.terms
            .iter()
            .flat_map(|(h, p)| {
                let (re, im) = p.inner_with(h);
                [re, im]
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coordinates()
            .iter()
            .map(|e| e.eval(x).powi(2))
            .sum::<f64>()
            + self.constant
    }
}

/// Rank-revealing factor of a Hermitian PSD matrix: vectors `l_r` with `Ψ = Σ_r l_r l_rᴴ`.
/// Eigenvalues below `1e-13 · λ_max` are discarded.
pub fn hermitian_factor(psi: &[Vec<Complex<f64>>]) -> Vec<Vec<Complex<f64>>> {
    let n = psi.len();
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_fn(n, n, |i, j| (psi[i][j] + psi[j][i].conj()) * 0.5);
    let eig = m.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (r, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-13 * lmax && lambda > 0.0 {
            let s = lambda.sqrt();
            out.push((0..n).map(|i| eig.eigenvectors[(i, r)] * s).collect());
        }
    }
    out
}

/// One constraint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    /// `expr = 0`
    Eq { expr: AffineExpr },
    /// `expr <= 0`
    Le { expr: AffineExpr },
    /// `‖x‖ <= t`
    Soc { t: AffineExpr, x: Vec<AffineExpr> },
    /// `‖x‖² <= u·v`, `u, v >= 0`
    RotatedSoc { u: AffineExpr, v: AffineExpr, x: Vec<AffineExpr> },
    /// `y·exp(z / y) <= x`, `y > 0`
    Exp { x: AffineExpr, y: AffineExpr, z: AffineExpr },
}

impl Block {
    fn exprs(&self) -> Vec<&AffineExpr> {
        match self {
            Block::Eq { expr } | Block::Le { expr } => vec![expr],
            Block::Soc { t, x } => std::iter::once(t).chain(x).collect(),
            Block::RotatedSoc { u, v, x } => [u, v].into_iter().chain(x).collect(),
            Block::Exp { x, y, z } => vec![x, y, z],
        }
    }

    /// Scaled violation of the block at `x`; zero when satisfied.
    pub fn residual(&self, xs: &[f64]) -> f64 {
        match self {
            Block::Eq { expr } => expr.eval(xs).abs() / (1.0 + expr.magnitude(xs)),
            Block::Le { expr } => expr.eval(xs).max(0.0) / (1.0 + expr.magnitude(xs)),
            Block::Soc { t, x } => {
                let tv = t.eval(xs);
                let nx = x.iter().map(|e| e.eval(xs).powi(2)).sum::<f64>().sqrt();
                (nx - tv).max(0.0) / (1.0 + tv.abs().max(nx))
            }
            Block::RotatedSoc { u, v, x } => {
                let (uv, vv) = (u.eval(xs), v.eval(xs));
                let sq = x.iter().map(|e| e.eval(xs).powi(2)).sum::<f64>();
                let lhs = (4.0 * sq + (uv - vv).powi(2)).sqrt();
                let rhs = uv + vv;
                let scale = 1.0 + uv.abs() + vv.abs() + sq.sqrt();
                ((lhs - rhs).max(0.0) + (-uv).max(0.0) + (-vv).max(0.0)) / scale
            }
            Block::Exp { x, y, z } => {
                let (xv, yv, zv) = (x.eval(xs), y.eval(xs), z.eval(xs));
                if yv > 0.0 {
                    let lhs = yv * (zv / yv).exp();
                    (lhs - xv).max(0.0) / (1.0 + xv.abs().max(lhs.abs()))
                } else {
                    // closure: y = 0, z <= 0, x >= 0
                    ((-yv).max(0.0) + zv.max(0.0) + (-xv).max(0.0)) / (1.0 + xv.abs())
                }
            }
        }
    }

    fn family(&self) -> ConeFamily {
        match self {
            Block::Eq { .. } | Block::Le { .. } => ConeFamily::Linear,
            Block::Soc { .. } | Block::RotatedSoc { .. } => ConeFamily::SecondOrder,
            Block::Exp { .. } => ConeFamily::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeFamily {
    Linear,
    SecondOrder,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub block: Block,
}

/// Handle to a constraint added to a [`ConicProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintHandle(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Present iff the status is `Optimal` or `MaxIterations`.
    pub primal: Option<Vec<f64>>,
    pub objective: f64,
    /// Largest scaled constraint violation at the primal (zero without a primal).
    pub residual: f64,
    pub iterations: u32,
}

impl SolveOutcome {
    /// Primal vector of an optimal solve, mapping every other status to an error.
    pub fn into_optimal(self) -> Result<(Vec<f64>, f64)> {
        match (self.status, self.primal) {
            (SolveStatus::Optimal, Some(x)) => Ok((x, self.objective)),
            (SolveStatus::Infeasible, _) => Err(Error::Infeasible),
            (status, _) => Err(Error::NumericalFailure(format!("{status:?}"))),
        }
    }
}

/// Linear objective (minimization) plus constraint blocks over `n` real variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub variables: Vec<String>,
    pub objective: AffineExpr,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.variables.push(name.into());
        Var(self.variables.len() - 1)
    }

    pub fn add_complex_vector(&mut self, name: &str, len: usize) -> ComplexVar {
        let start = self.variables.len();
        for i in 0..len {
            self.variables.push(format!("{name}[{i}].re"));
            self.variables.push(format!("{name}[{i}].im"));
        }
        ComplexVar { start, len }
    }

    pub fn minimize(&mut self, objective: AffineExpr) {
        self.objective = objective;
    }

    pub fn add(&mut self, label: impl Into<String>, block: Block) -> ConstraintHandle {
        self.constraints.push(Constraint { label: label.into(), block });
        ConstraintHandle(self.constraints.len() - 1)
    }

    /// `lhs <= rhs`
    pub fn add_le(&mut self, label: impl Into<String>, lhs: AffineExpr, rhs: AffineExpr) -> ConstraintHandle {
        self.add(label, Block::Le { expr: lhs.minus(&rhs) })
    }

    /// `lhs = rhs`
    pub fn add_eq(&mut self, label: impl Into<String>, lhs: AffineExpr, rhs: AffineExpr) -> ConstraintHandle {
        self.add(label, Block::Eq { expr: lhs.minus(&rhs) })
    }

    /// `‖x‖ <= t`
    pub fn add_soc(&mut self, label: impl Into<String>, x: Vec<AffineExpr>, t: AffineExpr) -> ConstraintHandle {
        self.add(label, Block::Soc { t, x })
    }

    /// `Σ |h_tᴴ p_t|² + constant <= rhs`, emitted as a rotated cone with unit second factor.
    pub fn add_quadratic_le_linear(
        &mut self,
        label: impl Into<String>,
        form: &ComplexQuadForm,
        rhs: AffineExpr,
    ) -> Result<ConstraintHandle> {
        for (h, p) in &form.terms {
            if h.len() != p.len {
                return Err(Error::Dimension(format!(
                    "quadratic term with {} coefficients on a length-{} variable",
                    h.len(),
                    p.len
                )));
            }
            if p.start + 2 * p.len > self.n_vars() {
                return Err(Error::Dimension("quadratic term references an unknown variable".into()));
            }
        }
        self.check_expr(&rhs)?;
        let u = rhs.add_const(-form.constant);
        Ok(self.add(
            label,
            Block::RotatedSoc {
                u,
                v: AffineExpr::constant(1.0),
                x: form.coordinates(),
            },
        ))
    }

    /// `1 + ρ >= 2^α`, i.e. `(1 + ρ, 1, α ln 2)` in the exponential cone.
    pub fn add_exp_rate_link(&mut self, label: impl Into<String>, rho: Var, alpha: Var) -> ConstraintHandle {
        self.add(
            label,
            Block::Exp {
                x: AffineExpr::var(rho).add_const(1.0),
                y: AffineExpr::constant(1.0),
                z: AffineExpr::term(alpha, std::f64::consts::LN_2),
            },
        )
    }

    fn check_expr(&self, e: &AffineExpr) -> Result<()> {
        match e.max_var() {
            Some(v) if v >= self.n_vars() => Err(Error::Dimension(format!("variable {v} does not exist"))),
            _ => Ok(()),
        }
    }

    /// Checks every block references existing variables and has finite data.
    pub fn validate(&self) -> Result<()> {
        self.check_expr(&self.objective)?;
        let finite = |e: &AffineExpr| e.constant.is_finite() && e.terms.iter().all(|t| t.1.is_finite());
        if !finite(&self.objective) {
            return Err(Error::InvalidParameter("objective is not finite".into()));
        }
        for c in &self.constraints {
            for e in c.block.exprs() {
                self.check_expr(e)?;
                if !finite(e) {
                    return Err(Error::InvalidParameter(format!("constraint {} is not finite", c.label)));
                }
            }
        }
        Ok(())
    }

    pub fn cone_families(&self) -> Vec<ConeFamily> {
        let mut out: Vec<ConeFamily> = Vec::new();
        for c in &self.constraints {
            let f = c.block.family();
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out
    }

    pub fn count_labelled(&self, prefix: &str) -> usize {
        self.constraints.iter().filter(|c| c.label.starts_with(prefix)).count()
    }

    pub fn constraint_residual(&self, handle: ConstraintHandle, x: &[f64]) -> f64 {
        self.constraints[handle.0].block.residual(x)
    }

    /// Largest scaled violation over all blocks.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.block.residual(x))
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Self-describing text dump (JSON) of variables, objective and blocks.
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("conic problem serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("bad problem dump: {e}")))
    }

    pub fn solve(&self, tolerance: f64) -> Result<SolveOutcome> {
        self.validate()?;
        backend::solve(self, tolerance)
    }
}
