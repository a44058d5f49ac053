//! Successive convex approximation of the secrecy-constrained WSR problem under
//! perfect CSIT.
//!
//! Each iteration solves a conic inner approximation built around the previous
//! iterate: rate auxiliaries linked to SINR auxiliaries through exponential cones,
//! quadratic-over-linear SINR terms replaced by their first-order lower bounds,
//! and the eavesdropper rates bounded from above through a tangent of `2^α`.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::conic::{AffineExpr, ComplexQuadForm, ComplexVar, ConicProblem, SolveStatus, Var, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::{compute_rates, wsr, ChannelSet, Precoders, SecrecySpec};
use crate::scalar::{inner, norm_sqr};
use crate::solution::{secrecy_violation, IterationRecord, PrecoderSolution, Scheme};

const LN2: f64 = std::f64::consts::LN_2;

/// Slack below which the feasibility phase counts as successful.
const SLACK_ZERO: f64 = 1e-7;

/// Primal residual tolerated when the conic solver stops short of full accuracy.
const INEXACT_RESIDUAL: f64 = 1e-6;

/// Starting point supplied by the caller in addition to the default initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub precoders: Precoders<f64>,
    pub common_rates: Vec<f64>,
}

impl From<&PrecoderSolution> for WarmStart {
    fn from(sol: &PrecoderSolution) -> Self {
        Self {
            precoders: sol.precoders.clone(),
            common_rates: sol.common_rates.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    /// Fraction of the power budget put on the common precoder at initialization.
    pub kappa: f64,
    /// Stop when the WSR changes by at most this much between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Tolerance handed to the conic solver.
    pub solver_tolerance: f64,
    /// Allowed shortfall of the true secrecy rates below the thresholds.
    pub feasibility_tolerance: f64,
    pub noise: f64,
    pub scheme: Scheme,
    /// Additional starting points; the best feasible result over all starts is returned.
    pub warm_starts: Vec<WarmStart>,
    /// Re-solve once from a different `κ` when the post-hoc secrecy check fails.
    pub retry_on_violation: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            tolerance: 1e-4,
            max_iterations: 200,
            solver_tolerance: DEFAULT_TOLERANCE,
            feasibility_tolerance: 1e-3,
            noise: 1.0,
            scheme: Scheme::RateSplitting,
            warm_starts: Vec::new(),
            retry_on_violation: true,
        }
    }
}

/// Auxiliary variables of one eavesdropping link (stream `owner` overheard by `eavesdropper`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiretapAux {
    pub owner: usize,
    pub eavesdropper: usize,
    pub alpha: f64,
    pub rho: f64,
}

/// Iterate of the SCA: precoders plus every auxiliary variable of the subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaState {
    pub iteration: usize,
    pub precoders: Precoders<f64>,
    pub common_rates: Vec<f64>,
    pub alpha_common: Vec<f64>,
    pub alpha_private: Vec<f64>,
    pub beta_common: Vec<f64>,
    pub beta_private: Vec<f64>,
    pub rho_common: Vec<f64>,
    pub rho_private: Vec<f64>,
    pub wiretap: Vec<WiretapAux>,
    /// Surrogate WSR `Σ u_k (C_k + α_p,k)` of the iterate.
    pub objective: f64,
}

/// Ordered pairs `(k, j)` whose wiretap rate enters a secrecy row.
pub fn secrecy_pairs(spec: &SecrecySpec<f64>) -> Vec<(usize, usize)> {
    let k = spec.n_users();
    (0..k)
        .filter(|&owner| spec.thresholds[owner] > 0.0)
        .flat_map(|owner| (0..k).filter(move |&j| j != owner).map(move |j| (owner, j)))
        .collect()
}

fn interference(h: &[Complex<f64>], precoders: &Precoders<f64>, skip: &[usize]) -> f64 {
    precoders
        .private
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, p)| inner(h, p).norm_sqr())
        .sum()
}

impl ScaState {
    /// State whose auxiliaries hold with equality at `precoders`.
    pub fn tight(
        channels: &ChannelSet<f64>,
        spec: &SecrecySpec<f64>,
        precoders: Precoders<f64>,
        common_rates: Vec<f64>,
        noise: f64,
    ) -> Result<Self> {
        let rates = compute_rates(channels, &precoders, noise)?;
        let k = channels.n_users();
        let mut beta_common = Vec::with_capacity(k);
        let mut beta_private = Vec::with_capacity(k);
        for user in 0..k {
            let h = channels.user(user);
            let private_all = interference(h, &precoders, &[]);
            beta_common.push(private_all + noise);
            beta_private.push(interference(h, &precoders, &[user]) + noise);
        }
        let wiretap = secrecy_pairs(spec)
            .into_iter()
            .map(|(owner, eavesdropper)| WiretapAux {
                owner,
                eavesdropper,
                alpha: rates.rate_wiretap[owner][eavesdropper],
                rho: rates.sinr_wiretap[owner][eavesdropper],
            })
            .collect();
        let objective = wsr(&rates, &common_rates, &spec.weights)?;
        Ok(Self {
            iteration: 0,
            precoders,
            common_rates,
            alpha_common: rates.rate_common.clone(),
            alpha_private: rates.rate_private.clone(),
            beta_common,
            beta_private,
            rho_common: rates.sinr_common.clone(),
            rho_private: rates.sinr_private.clone(),
            wiretap,
            objective,
        })
    }
}

/// Top left singular vector of `H = [h_1 … h_K]`.
fn dominant_direction(channels: &ChannelSet<f64>) -> Result<Vec<Complex<f64>>> {
    let (n, k) = (channels.n_tx(), channels.n_users());
    let h = DMatrix::from_fn(n, k, |i, j| channels.user(j)[i]);
    let svd = h.svd(true, false);
    let (best, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::ZeroChannel)?;
    if !(sigma > 0.0) {
        return Err(Error::ZeroChannel);
    }
    let u = svd.u.ok_or_else(|| Error::NumericalFailure("singular vectors unavailable".into()))?;
    Ok((0..n).map(|i| u[(i, best)]).collect())
}

/// Default starting precoders: `√(κ P_t)` along the dominant channel direction for the
/// common stream and `√((1 − κ) P_t / K)` along each user's own channel (MRT).
pub fn initial_precoders(channels: &ChannelSet<f64>, power: f64, kappa: f64) -> Result<Precoders<f64>> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter("kappa must lie in [0, 1]".into()));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::InvalidParameter("power budget must be positive".into()));
    }
    let (n, k) = (channels.n_tx(), channels.n_users());
    let u_c = dominant_direction(channels)?;
    let common_amp = (kappa * power).sqrt();
    let private_amp = ((1.0 - kappa) * power / k as f64).sqrt();
    let common = u_c.iter().map(|x| x * common_amp).collect();
    let private = channels
        .users()
        .iter()
        .map(|h| {
            let norm = norm_sqr(h).sqrt();
            if norm > 0.0 {
                h.iter().map(|x| x * (private_amp / norm)).collect()
            } else {
                // no MRT direction for a zero channel: first antenna
                let mut e = vec![Complex::new(0.0, 0.0); n];
                e[0] = Complex::new(private_amp, 0.0);
                e
            }
        })
        .collect();
    Ok(Precoders { common, private })
}

/// Tight initial state: default precoders and the minimum common rate split uniformly.
pub fn initialize(
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    kappa: f64,
    scheme: Scheme,
    noise: f64,
) -> Result<ScaState> {
    let kappa = if scheme.has_common_stream() { kappa } else { 0.0 };
    let precoders = initial_precoders(channels, power, kappa)?;
    let rates = compute_rates(channels, &precoders, noise)?;
    let k = channels.n_users();
    let share = if scheme.has_common_stream() {
        rates.min_common_rate().max(0.0) / k as f64
    } else {
        0.0
    };
    ScaState::tight(channels, spec, precoders, vec![share; k], noise)
}

fn state_from_start(
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    start: &WarmStart,
    power: f64,
    scheme: Scheme,
    noise: f64,
) -> Result<ScaState> {
    let mut precoders = start.precoders.clone();
    precoders.check_against(channels)?;
    let k = channels.n_users();
    if start.common_rates.len() != k {
        return Err(Error::Dimension("warm start needs one common rate per user".into()));
    }
    let mut common_rates: Vec<f64> = start.common_rates.iter().map(|c| c.max(0.0)).collect();
    if !scheme.has_common_stream() {
        precoders.common.iter_mut().for_each(|x| *x = Complex::new(0.0, 0.0));
        common_rates.iter_mut().for_each(|c| *c = 0.0);
    }
    // pull the start strictly inside the power ball so the conic solver has an interior
    let total = precoders.total_power();
    if total > power {
        precoders = precoders.scaled((power / total).sqrt());
    }
    let rates = compute_rates(channels, &precoders, noise)?;
    let budget = rates.min_common_rate().max(0.0);
    let used: f64 = common_rates.iter().sum();
    if used > budget && used > 0.0 {
        common_rates.iter_mut().for_each(|c| *c *= budget / used);
    }
    ScaState::tight(channels, spec, precoders, common_rates, noise)
}

/// Variable handles of one subproblem.
#[derive(Debug, Clone)]
pub struct ScaVariables {
    pub common: Option<ComplexVar>,
    pub private: Vec<ComplexVar>,
    pub common_rates: Vec<Var>,
    pub alpha_common: Vec<Var>,
    pub alpha_private: Vec<Var>,
    pub beta_common: Vec<Var>,
    pub beta_private: Vec<Var>,
    pub rho_common: Vec<Var>,
    pub rho_private: Vec<Var>,
    /// `(owner, eavesdropper, α, ρ)` for every secrecy pair.
    pub wiretap: Vec<(usize, usize, Var, Var)>,
    /// Secrecy slacks of the feasibility phase, one per secrecy row.
    pub slack: Vec<Var>,
}

/// Conic subproblem around `state` together with its variable handles.
#[derive(Debug, Clone)]
pub struct ScaSubproblem {
    pub problem: ConicProblem,
    pub vars: ScaVariables,
}

/// `2 Re{conj(a0) · hᴴp}` as an affine expression in `p`.
fn tangent_cross(h: &[Complex<f64>], p: ComplexVar, a0: Complex<f64>) -> AffineExpr {
    let (re, im) = p.inner_with(h);
    re.scaled(2.0 * a0.re).plus(&im.scaled(2.0 * a0.im))
}

/// Builds the convex inner approximation around `state`.
///
/// With `feasibility = true` every secrecy row gets a nonnegative slack and the objective
/// becomes the total slack.
pub fn build_subproblem(
    state: &ScaState,
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    scheme: Scheme,
    noise: f64,
    feasibility: bool,
) -> Result<ScaSubproblem> {
    let (n, k) = (channels.n_tx(), channels.n_users());
    if spec.n_users() != k || state.precoders.n_users() != k {
        return Err(Error::Dimension("spec, state and channels disagree on the user count".into()));
    }
    let rs = scheme.has_common_stream();
    let mut prob = ConicProblem::new();
    let common = rs.then(|| prob.add_complex_vector("p_c", n));
    let private: Vec<ComplexVar> = (0..k).map(|i| prob.add_complex_vector(&format!("p_{i}"), n)).collect();
    let mut per_user = |name: &str, on: bool| -> Vec<Var> {
        if on {
            (0..k).map(|i| prob.add_var(format!("{name}[{i}]"))).collect()
        } else {
            Vec::new()
        }
    };
    let common_rates = per_user("c", rs);
    let alpha_common = per_user("alpha_c", rs);
    let alpha_private = per_user("alpha_p", true);
    let beta_common = per_user("beta_c", rs);
    let beta_private = per_user("beta_p", true);
    let rho_common = per_user("rho_c", rs);
    let rho_private = per_user("rho_p", true);
    let wiretap: Vec<(usize, usize, Var, Var)> = state
        .wiretap
        .iter()
        .map(|w| {
            let a = prob.add_var(format!("alpha_w[{},{}]", w.owner, w.eavesdropper));
            let r = prob.add_var(format!("rho_w[{},{}]", w.owner, w.eavesdropper));
            (w.owner, w.eavesdropper, a, r)
        })
        .collect();
    let slack: Vec<Var> = if feasibility {
        (0..wiretap.len()).map(|i| prob.add_var(format!("slack[{i}]"))).collect()
    } else {
        Vec::new()
    };

    if feasibility {
        prob.minimize(AffineExpr::sum_vars(slack.iter().copied()));
        for &s in &slack {
            prob.add_le("slack_nonneg", AffineExpr::constant(0.0), AffineExpr::var(s));
        }
    } else {
        let mut obj = AffineExpr::default();
        for i in 0..k {
            let u = spec.weights[i];
            obj = obj.add_term(alpha_private[i], -u);
            if rs {
                obj = obj.add_term(common_rates[i], -u);
            }
        }
        prob.minimize(obj);
    }

    // secrecy: α_p,k − α_{k,j} >= R^th_k
    for (idx, &(owner, eav, a, _)) in wiretap.iter().enumerate() {
        let mut lhs = AffineExpr::var(alpha_private[owner]).add_term(a, -1.0);
        if feasibility {
            lhs = lhs.add_term(slack[idx], 1.0);
        }
        prob.add_le(
            format!("secrecy[{owner},{eav}]"),
            AffineExpr::constant(spec.thresholds[owner]),
            lhs,
        );
    }

    if rs {
        // Σ_j C_j <= α_c,k and C_k >= 0
        for i in 0..k {
            prob.add_le(
                format!("common_rate[{i}]"),
                AffineExpr::sum_vars(common_rates.iter().copied()),
                AffineExpr::var(alpha_common[i]),
            );
        }
        for &c in &common_rates {
            prob.add_le("common_nonneg", AffineExpr::constant(0.0), AffineExpr::var(c));
        }
    }

    // 1 + ρ >= 2^α for common and private streams
    for i in 0..k {
        if rs {
            prob.add_exp_rate_link(format!("rate_link_c[{i}]"), rho_common[i], alpha_common[i]);
        }
        prob.add_exp_rate_link(format!("rate_link_p[{i}]"), rho_private[i], alpha_private[i]);
    }

    // 1 + ρ_{k,j} <= 2^{α0} (1 + ln2 (α − α0))
    for (w, &(owner, eav, a, r)) in state.wiretap.iter().zip(&wiretap) {
        let scale = 2f64.powf(w.alpha);
        let rhs = AffineExpr::term(a, scale * LN2).add_const(scale * (1.0 - LN2 * w.alpha));
        prob.add_le(format!("wiretap_tangent[{owner},{eav}]"), AffineExpr::var(r).add_const(1.0), rhs);
    }

    // interference-plus-noise denominators
    for i in 0..k {
        let h = channels.user(i);
        if rs {
            let form = private
                .iter()
                .fold(ComplexQuadForm::new(noise), |f, &p| f.with_term(h, p));
            prob.add_quadratic_le_linear(format!("denominator_c[{i}]"), &form, AffineExpr::var(beta_common[i]))?;
        }
        let form = private
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(ComplexQuadForm::new(noise), |f, (_, &p)| f.with_term(h, p));
        prob.add_quadratic_le_linear(format!("denominator_p[{i}]"), &form, AffineExpr::var(beta_private[i]))?;
    }

    // first-order lower bounds of |hᴴp|² / β
    for i in 0..k {
        let h = channels.user(i);
        let add_bound = |prob: &mut ConicProblem, label: String, p: ComplexVar, p0: &[Complex<f64>], beta: Var, beta0: f64, rho: Var| {
            let a0 = inner(h, p0);
            let lhs = tangent_cross(h, p, a0)
                .scaled(1.0 / beta0)
                .add_term(beta, -a0.norm_sqr() / (beta0 * beta0));
            prob.add_le(label, AffineExpr::var(rho), lhs);
        };
        if let Some(pc) = common {
            add_bound(
                &mut prob,
                format!("sinr_bound_c[{i}]"),
                pc,
                &state.precoders.common,
                beta_common[i],
                state.beta_common[i],
                rho_common[i],
            );
        }
        add_bound(
            &mut prob,
            format!("sinr_bound_p[{i}]"),
            private[i],
            &state.precoders.private[i],
            beta_private[i],
            state.beta_private[i],
            rho_private[i],
        );
    }

    // wiretap SINR upper bound, first-order in the interfering private streams
    for (w, &(owner, eav, _, r)) in state.wiretap.iter().zip(&wiretap) {
        let h = channels.user(eav);
        let mut lin = AffineExpr::default();
        let mut base = 0.0;
        for kp in (0..k).filter(|&kp| kp != owner && kp != eav) {
            let a0 = inner(h, &state.precoders.private[kp]);
            lin = lin.plus(&tangent_cross(h, private[kp], a0).add_const(-a0.norm_sqr()));
            base += a0.norm_sqr();
        }
        let rhs = lin.scaled(w.rho).add_term(r, base + noise);
        let form = ComplexQuadForm::new(0.0).with_term(h, private[owner]);
        prob.add_quadratic_le_linear(format!("wiretap_bilinear[{owner},{eav}]"), &form, rhs)?;
    }

    // ‖P‖_F <= √P_t
    let coords: Vec<AffineExpr> = common
        .iter()
        .chain(&private)
        .flat_map(|p| p.coords().map(AffineExpr::var).collect::<Vec<_>>())
        .collect();
    prob.add_soc("power", coords, AffineExpr::constant(power.sqrt()));

    Ok(ScaSubproblem {
        problem: prob,
        vars: ScaVariables {
            common,
            private,
            common_rates,
            alpha_common,
            alpha_private,
            beta_common,
            beta_private,
            rho_common,
            rho_private,
            wiretap,
            slack,
        },
    })
}

impl ScaVariables {
    fn extract(&self, x: &[f64], n_tx: usize, weights: &[f64], iteration: usize) -> ScaState {
        let k = self.private.len();
        let read = |v: &[Var]| -> Vec<f64> { v.iter().map(|&v| x[v.0]).collect() };
        let or_zero = |v: Vec<f64>| if v.is_empty() { vec![0.0; k] } else { v };
        let common = match self.common {
            Some(pc) => pc.value(x),
            None => vec![Complex::new(0.0, 0.0); n_tx],
        };
        let common_rates: Vec<f64> = or_zero(read(&self.common_rates)).into_iter().map(|c| c.max(0.0)).collect();
        let alpha_private = read(&self.alpha_private);
        let objective = (0..k).map(|i| weights[i] * (common_rates[i] + alpha_private[i])).sum();
        ScaState {
            iteration,
            precoders: Precoders {
                common,
                private: self.private.iter().map(|p| p.value(x)).collect(),
            },
            common_rates,
            alpha_common: or_zero(read(&self.alpha_common)),
            alpha_private,
            beta_common: or_zero(read(&self.beta_common)),
            beta_private: read(&self.beta_private),
            rho_common: or_zero(read(&self.rho_common)),
            rho_private: read(&self.rho_private),
            wiretap: self
                .wiretap
                .iter()
                .map(|&(owner, eavesdropper, a, r)| WiretapAux {
                    owner,
                    eavesdropper,
                    alpha: x[a.0],
                    rho: x[r.0],
                })
                .collect(),
            objective,
        }
    }
}

/// Solves the subproblem and returns the primal, accepting an inexact stop with small residual.
fn solve_checked(problem: &ConicProblem, tolerance: f64) -> Result<Vec<f64>> {
    let out = problem.solve(tolerance)?;
    match (out.status, out.primal) {
        (SolveStatus::Optimal, Some(x)) => Ok(x),
        (SolveStatus::MaxIterations, Some(x)) if out.residual <= INEXACT_RESIDUAL => Ok(x),
        (SolveStatus::Infeasible, _) => Err(Error::Infeasible),
        (status, _) => Err(Error::NumericalFailure(format!("subproblem ended with {status:?}"))),
    }
}

/// One SCA step: solve the subproblem around `state` and return its optimizer.
pub fn iterate(
    state: &ScaState,
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &ScaOptions,
) -> Result<ScaState> {
    let sub = build_subproblem(state, channels, spec, power, options.scheme, options.noise, false)?;
    let x = solve_checked(&sub.problem, options.solver_tolerance)?;
    Ok(sub.vars.extract(&x, channels.n_tx(), &spec.weights, state.iteration + 1))
}

/// Whether the true rates at `precoders` satisfy every secrecy row.
fn secrecy_holds(channels: &ChannelSet<f64>, spec: &SecrecySpec<f64>, precoders: &Precoders<f64>, noise: f64) -> Result<bool> {
    let rates = compute_rates(channels, precoders, noise)?;
    Ok(secrecy_violation(&rates, &spec.thresholds) <= 0.0)
}

/// Drives the secrecy slack to zero with the same surrogates. Returns a tight state that
/// meets every threshold, or `InfeasibleThresholds` with the converged slack.
fn feasibility_phase(
    start: ScaState,
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &ScaOptions,
) -> Result<ScaState> {
    let mut state = start;
    let mut last = f64::INFINITY;
    for _ in 0..options.max_iterations.max(1) {
        let sub = build_subproblem(&state, channels, spec, power, options.scheme, options.noise, true)?;
        let x = solve_checked(&sub.problem, options.solver_tolerance)?;
        let total: f64 = sub.vars.slack.iter().map(|s| x[s.0].max(0.0)).sum();
        let next = sub.vars.extract(&x, channels.n_tx(), &spec.weights, 0);
        let mut common_rates = next.common_rates.clone();
        let rates = compute_rates(channels, &next.precoders, options.noise)?;
        let used: f64 = common_rates.iter().sum();
        let budget = rates.min_common_rate();
        if used > budget && used > 0.0 {
            common_rates.iter_mut().for_each(|c| *c *= budget / used);
        }
        state = ScaState::tight(channels, spec, next.precoders, common_rates, options.noise)?;
        if total <= SLACK_ZERO && secrecy_holds(channels, spec, &state.precoders, options.noise)? {
            return Ok(state);
        }
        if (last - total).abs() <= 1e-3 * options.tolerance.max(1e-9) + 1e-9 && total > SLACK_ZERO {
            return Err(Error::InfeasibleThresholds { slack: total });
        }
        last = total;
    }
    if secrecy_holds(channels, spec, &state.precoders, options.noise)? {
        Ok(state)
    } else {
        Err(Error::InfeasibleThresholds { slack: last })
    }
}

/// Result of one SCA run from one starting point.
#[derive(Debug, Clone)]
struct Run {
    state: ScaState,
    trace: Vec<IterationRecord>,
    converged: bool,
}

fn record(state: &ScaState, channels: &ChannelSet<f64>, spec: &SecrecySpec<f64>, noise: f64) -> Result<IterationRecord> {
    let rates = compute_rates(channels, &state.precoders, noise)?;
    let true_wsr = (0..rates.n_users())
        .map(|k| spec.weights[k] * (state.common_rates[k] + rates.rate_private[k]))
        .sum();
    Ok(IterationRecord {
        iteration: state.iteration,
        objective: state.objective,
        wsr: true_wsr,
        common_rates: state.common_rates.clone(),
        private_rates: rates.rate_private,
    })
}

fn run_from(
    start: ScaState,
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &ScaOptions,
) -> Result<Run> {
    let mut state = if spec.any_active() && !secrecy_holds(channels, spec, &start.precoders, options.noise)? {
        feasibility_phase(start, channels, spec, power, options)?
    } else {
        start
    };
    let mut trace = Vec::new();
    let mut converged = false;
    for it in 1..=options.max_iterations {
        let next = match iterate(&state, channels, spec, power, options) {
            Ok(s) => s,
            // a failure after the first step leaves the previous iterate as the answer
            Err(Error::NumericalFailure(_) | Error::Infeasible) if it > 1 => break,
            Err(e) => return Err(e),
        };
        let delta = (next.objective - state.objective).abs();
        state = next;
        trace.push(record(&state, channels, spec, options.noise)?);
        if delta <= options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Run { state, trace, converged })
}

fn finish(run: Run, channels: &ChannelSet<f64>, spec: &SecrecySpec<f64>, options: &ScaOptions, kappa: Option<f64>) -> Result<PrecoderSolution> {
    let state = run.state;
    let rates = compute_rates(channels, &state.precoders, options.noise)?;
    let mut common_rates = state.common_rates.clone();
    // the surrogate common rate never exceeds the true one; guard against solver round-off
    let budget = rates.min_common_rate().max(0.0);
    let used: f64 = common_rates.iter().sum();
    if used > budget && used > 0.0 {
        common_rates.iter_mut().for_each(|c| *c *= budget / used);
    }
    let wsr_value = wsr(&rates, &common_rates, &spec.weights)?;
    let violation = secrecy_violation(&rates, &spec.thresholds);
    Ok(PrecoderSolution {
        scheme: options.scheme,
        precoders: state.precoders,
        common_rates,
        wsr: wsr_value,
        rates,
        iterations: run.trace.len(),
        trace: run.trace,
        converged: run.converged,
        secrecy_ok: violation <= options.feasibility_tolerance,
        max_secrecy_violation: violation,
        kappa,
    })
}

/// Rejects thresholds above the single-user capacity `log2(1 + P_t ‖h_k‖² / σ²)`.
pub fn check_threshold_capacity(channels: &ChannelSet<f64>, spec: &SecrecySpec<f64>, power: f64, noise: f64) -> Result<()> {
    for (k, &t) in spec.thresholds.iter().enumerate() {
        let cap = (1.0 + power * norm_sqr(channels.user(k)) / noise).log2();
        if t > cap {
            return Err(Error::InfeasibleThresholds { slack: t - cap });
        }
    }
    Ok(())
}

fn better(a: &PrecoderSolution, b: &PrecoderSolution) -> bool {
    match (a.secrecy_ok, b.secrecy_ok) {
        (true, false) => true,
        (false, true) => false,
        _ => a.wsr > b.wsr,
    }
}

/// Secrecy-constrained WSR maximization under perfect CSIT.
///
/// Runs the SCA from the default `κ` initialization and from every warm start, and
/// returns the best solution whose true secrecy rates meet the thresholds. A warm start
/// that no run improves on is returned unchanged, with an empty trace.
pub fn solve_wsr(
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &ScaOptions,
) -> Result<PrecoderSolution> {
    if spec.n_users() != channels.n_users() {
        return Err(Error::Dimension("secrecy spec and channels disagree on the user count".into()));
    }
    check_threshold_capacity(channels, spec, power, options.noise)?;
    let mut starts = vec![(Some(options.kappa), initialize(channels, spec, power, options.kappa, options.scheme, options.noise)?)];
    for ws in &options.warm_starts {
        starts.push((None, state_from_start(channels, spec, ws, power, options.scheme, options.noise)?));
    }
    let mut best: Option<PrecoderSolution> = None;
    let mut first_err = None;
    for (kappa, start) in starts {
        if kappa.is_none() {
            // the warm start itself competes, so iterating away from it never loses WSR
            let kept = Run {
                state: start.clone(),
                trace: Vec::new(),
                converged: true,
            };
            if let Ok(sol) = finish(kept, channels, spec, options, None) {
                if best.as_ref().map_or(true, |b| better(&sol, b)) {
                    best = Some(sol);
                }
            }
        }
        match run_from(start, channels, spec, power, options).and_then(|r| finish(r, channels, spec, options, kappa)) {
            Ok(sol) => {
                if best.as_ref().map_or(true, |b| better(&sol, b)) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if options.retry_on_violation && options.scheme.has_common_stream() && best.as_ref().map_or(false, |b| !b.secrecy_ok) {
        let kappa = if options.kappa >= 0.5 { options.kappa - 0.3 } else { options.kappa + 0.3 };
        let start = initialize(channels, spec, power, kappa, options.scheme, options.noise)?;
        if let Ok(sol) = run_from(start, channels, spec, power, options).and_then(|r| finish(r, channels, spec, options, Some(kappa))) {
            if best.as_ref().map_or(true, |b| better(&sol, b)) {
                best = Some(sol);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::NumericalFailure("no start produced a solution".into())),
    }
}
