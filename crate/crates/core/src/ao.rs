//! Weighted average sum-rate maximization under imperfect CSIT.
//!
//! The expectation over the CSIT error is replaced by an average over `M` conditional
//! channel samples drawn once per run. Rates are traded for weighted MSEs: the outer
//! loop fixes the MMSE equalizers and weights at the current precoders, the inner loop
//! solves a second-order-cone problem in the precoders and the negated common rates,
//! re-linearizing the eavesdroppers' weighted MSEs at every inner step.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{AffineExpr, ComplexQuadForm, ComplexVar, ConicProblem, SolveStatus, Var, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::{compute_rates, sample_csit, ChannelSet, CsitModel, Precoders, RateBreakdown, SecrecySpec};
use crate::sca::{check_threshold_capacity, initial_precoders, secrecy_pairs, WarmStart};
use crate::solution::{secrecy_violation, IterationRecord, PrecoderSolution, Scheme};
use crate::wmmse::{compute_averages, update_equalizers_and_weights, wmse_scale, AveragedCoefficients, StreamAverage, StreamId};

const INEXACT_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoOptions {
    pub kappa: f64,
    /// Outer stop: change of the weighted average sum-rate.
    pub outer_tolerance: f64,
    /// Inner stop: change of the inner WMMSE objective.
    pub inner_tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Number of conditional channel samples `M`.
    pub samples: usize,
    /// Seed of the sample draw.
    pub seed: u64,
    pub solver_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub noise: f64,
    pub scheme: Scheme,
    pub warm_starts: Vec<WarmStart>,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            outer_tolerance: 1e-4,
            inner_tolerance: 1e-5,
            max_outer: 200,
            max_inner: 50,
            samples: 1000,
            seed: 0,
            solver_tolerance: DEFAULT_TOLERANCE,
            feasibility_tolerance: 1e-3,
            noise: 1.0,
            scheme: Scheme::RateSplitting,
            warm_starts: Vec::new(),
        }
    }
}

/// Sample-average rates: every SINR and rate of the breakdown is the mean over `samples`,
/// and the secrecy rates are formed from the averaged private and wiretap rates.
pub fn saf_rates(samples: &[ChannelSet<f64>], precoders: &Precoders<f64>, noise: f64) -> Result<RateBreakdown<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let per: Vec<RateBreakdown<f64>> = samples
        .par_iter()
        .map(|h| compute_rates(h, precoders, noise))
        .collect::<Result<_>>()?;
    let m = per.len() as f64;
    let k = precoders.n_users();
    let mean_vec = |f: &dyn Fn(&RateBreakdown<f64>) -> &Vec<f64>| -> Vec<f64> {
        (0..k).map(|i| per.iter().map(|r| f(r)[i]).sum::<f64>() / m).collect()
    };
    let mean_mat = |f: &dyn Fn(&RateBreakdown<f64>) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| per.iter().map(|r| f(r)[i][j]).sum::<f64>() / m).collect())
            .collect()
    };
    let mut out = RateBreakdown {
        noise,
        sinr_common: mean_vec(&|r| &r.sinr_common),
        sinr_private: mean_vec(&|r| &r.sinr_private),
        sinr_wiretap: mean_mat(&|r| &r.sinr_wiretap),
        rate_common: mean_vec(&|r| &r.rate_common),
        rate_private: mean_vec(&|r| &r.rate_private),
        rate_wiretap: mean_mat(&|r| &r.rate_wiretap),
        secrecy: Vec::with_capacity(k),
    };
    out.secrecy = (0..k)
        .map(|i| (out.rate_private[i] - out.max_wiretap(i)).max(0.0))
        .collect();
    Ok(out)
}

/// Iterate of the alternating optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoState {
    pub outer: usize,
    pub precoders: Precoders<f64>,
    /// `x̄ = −c̄`.
    pub neg_common_rates: Vec<f64>,
    /// Surrogates `ᾱ_{k,j}` of the eavesdroppers' weighted MSEs, keyed like [`secrecy_pairs`].
    pub wiretap_alpha: Vec<f64>,
    /// Outer objective `Σ u_k (ξ̄_p,k + X̄_k)` after each outer iteration.
    pub outer_trace: Vec<f64>,
    /// Inner objectives of the latest inner loop.
    pub inner_trace: Vec<f64>,
}

/// Variable handles of one inner problem.
#[derive(Debug, Clone)]
pub struct InnerVariables {
    pub common: Option<ComplexVar>,
    pub private: Vec<ComplexVar>,
    /// `X̄_k`, empty without a common stream.
    pub neg_common_rates: Vec<Var>,
    /// Epigraph variables of `ξ̄_p,k`.
    pub private_wmse: Vec<Var>,
    pub wiretap_alpha: Vec<Var>,
    pub slack: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct InnerSubproblem {
    pub problem: ConicProblem,
    pub vars: InnerVariables,
}

/// `ξ̄` with its quadratic part as a cone form and the rest as an affine expression.
fn wmse_parts(
    avg: &StreamAverage<f64>,
    common: Option<ComplexVar>,
    private: &[ComplexVar],
    noise: f64,
) -> (ComplexQuadForm, AffineExpr) {
    let s = wmse_scale::<f64>();
    let psi: Vec<Vec<Complex<f64>>> = avg.psi.iter().map(|r| r.iter().map(|z| z * s).collect()).collect();
    let mut form = ComplexQuadForm::new(0.0);
    if avg.id.includes_common() {
        if let Some(pc) = common {
            form = form.with_hermitian(&psi, pc);
        }
    }
    for i in avg.id.private_in_total(private.len()) {
        form = form.with_hermitian(&psi, private[i]);
    }
    (form, linear_rest(avg, common, private, noise))
}

/// `s (t̄ σ² − 2 Re{f̄ᴴ p_signal} + ū) − v̄ + 1 − s`.
fn linear_rest(avg: &StreamAverage<f64>, common: Option<ComplexVar>, private: &[ComplexVar], noise: f64) -> AffineExpr {
    let s = wmse_scale::<f64>();
    let signal = match avg.id {
        StreamId::Common(_) => common,
        StreamId::Private(k) | StreamId::Wiretap { owner: k, .. } => Some(private[k]),
    };
    let cross = match signal {
        Some(p) => p.real_inner_with(&avg.f).scaled(-2.0 * s),
        None => AffineExpr::default(),
    };
    cross.add_const(s * (avg.t * noise + avg.u) - avg.v + 1.0 - s)
}

/// `ξ̄_{k,j}` with every `pᴴΨ̄p` replaced by its tangent at `expansion`.
fn linearized_wiretap(
    avg: &StreamAverage<f64>,
    private: &[ComplexVar],
    expansion: &Precoders<f64>,
    noise: f64,
) -> AffineExpr {
    let s = wmse_scale::<f64>();
    let mut expr = linear_rest(avg, None, private, noise);
    for i in avg.id.private_in_total(private.len()) {
        let p0 = &expansion.private[i];
        // Ψ̄ p0, so that 2 Re{p0ᴴ Ψ̄ p} = 2 Re{(Ψ̄ p0)ᴴ p}
        let psi_p0: Vec<Complex<f64>> = avg
            .psi
            .iter()
            .map(|row| row.iter().zip(p0).map(|(a, b)| a * b).sum())
            .collect();
        let q0 = crate::wmmse::quad_form(&avg.psi, p0);
        expr = expr
            .plus(&private[i].real_inner_with(&psi_p0).scaled(2.0 * s))
            .add_const(-s * q0);
    }
    expr
}

/// Builds the inner second-order-cone problem for fixed averaged coefficients, with the
/// eavesdroppers' weighted MSEs linearized at `expansion`.
///
/// With `slack_penalty = Some(λ)` every secrecy row gets a nonnegative slack charged
/// `λ` per unit in the objective. Between outer updates the wiretap weighted MSEs are
/// stale, so a hard-constrained problem can turn infeasible; the elastic form cannot,
/// and its fixed points with zero slack meet the thresholds in sample average.
pub fn build_inner_subproblem(
    averages: &AveragedCoefficients<f64>,
    expansion: &Precoders<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    scheme: Scheme,
    noise: f64,
    slack_penalty: Option<f64>,
) -> Result<InnerSubproblem> {
    let (n, k) = (expansion.n_tx(), expansion.n_users());
    let rs = scheme.has_common_stream();
    let mut prob = ConicProblem::new();
    let common = rs.then(|| prob.add_complex_vector("p_c", n));
    let private: Vec<ComplexVar> = (0..k).map(|i| prob.add_complex_vector(&format!("p_{i}"), n)).collect();
    let neg_common_rates: Vec<Var> = if rs {
        (0..k).map(|i| prob.add_var(format!("x[{i}]"))).collect()
    } else {
        Vec::new()
    };
    let private_wmse: Vec<Var> = (0..k).map(|i| prob.add_var(format!("tau[{i}]"))).collect();
    let pairs = secrecy_pairs(spec);
    let wiretap_alpha: Vec<Var> = pairs
        .iter()
        .map(|(a, b)| prob.add_var(format!("alpha_w[{a},{b}]")))
        .collect();
    let slack: Vec<Var> = match slack_penalty {
        Some(_) => (0..pairs.len()).map(|i| prob.add_var(format!("slack[{i}]"))).collect(),
        None => Vec::new(),
    };

    let mut obj = AffineExpr::default();
    for i in 0..k {
        obj = obj.add_term(private_wmse[i], spec.weights[i]);
        if rs {
            obj = obj.add_term(neg_common_rates[i], spec.weights[i]);
        }
    }
    for &s in &slack {
        obj = obj.add_term(s, slack_penalty.unwrap_or(0.0));
        prob.add_le("slack_nonneg", AffineExpr::constant(0.0), AffineExpr::var(s));
    }
    prob.minimize(obj);

    // τ_k >= ξ̄_p,k
    for i in 0..k {
        let (form, rest) = wmse_parts(averages.get(StreamId::Private(i)), common, &private, noise);
        prob.add_quadratic_le_linear(format!("private_wmse[{i}]"), &form, AffineExpr::var(private_wmse[i]).minus(&rest))?;
    }

    // τ_k − ᾱ_{k,j} <= −R^th_k and ᾱ_{k,j} <= linearized ξ̄_{k,j}
    for (idx, &(owner, eav)) in pairs.iter().enumerate() {
        let mut lhs = AffineExpr::var(private_wmse[owner]).add_term(wiretap_alpha[idx], -1.0);
        if let Some(&s) = slack.get(idx) {
            lhs = lhs.add_term(s, -1.0);
        }
        prob.add_le(format!("secrecy[{owner},{eav}]"), lhs, AffineExpr::constant(-spec.thresholds[owner]));
        let id = StreamId::Wiretap { owner, eavesdropper: eav };
        let lin = linearized_wiretap(averages.get(id), &private, expansion, noise);
        prob.add_le(format!("wiretap_wmse[{owner},{eav}]"), AffineExpr::var(wiretap_alpha[idx]), lin);
    }

    if rs {
        // −Σ X̄_j + ξ̄_c,k <= 1 and X̄ <= 0
        for i in 0..k {
            let (form, rest) = wmse_parts(averages.get(StreamId::Common(i)), common, &private, noise);
            let rhs = AffineExpr::sum_vars(neg_common_rates.iter().copied())
                .add_const(1.0)
                .minus(&rest);
            prob.add_quadratic_le_linear(format!("common_wmse[{i}]"), &form, rhs)?;
        }
        for &x in &neg_common_rates {
            prob.add_le("common_nonneg", AffineExpr::var(x), AffineExpr::constant(0.0));
        }
    }

    let coords: Vec<AffineExpr> = common
        .iter()
        .chain(&private)
        .flat_map(|p| p.coords().map(AffineExpr::var).collect::<Vec<_>>())
        .collect();
    prob.add_soc("power", coords, AffineExpr::constant(power.sqrt()));

    Ok(InnerSubproblem {
        problem: prob,
        vars: InnerVariables {
            common,
            private,
            neg_common_rates,
            private_wmse,
            wiretap_alpha,
            slack,
        },
    })
}

/// Optimizer of one inner problem.
#[derive(Debug, Clone)]
struct InnerPoint {
    precoders: Precoders<f64>,
    neg_common_rates: Vec<f64>,
    wiretap_alpha: Vec<f64>,
    objective: f64,
}

fn solve_inner(sub: &InnerSubproblem, n_tx: usize, tolerance: f64) -> Result<InnerPoint> {
    let out = sub.problem.solve(tolerance)?;
    let x = match (out.status, out.primal) {
        (SolveStatus::Optimal, Some(x)) => x,
        (SolveStatus::MaxIterations, Some(x)) if out.residual <= INEXACT_RESIDUAL => x,
        (SolveStatus::Infeasible, _) => return Err(Error::Infeasible),
        (status, _) => return Err(Error::NumericalFailure(format!("inner problem ended with {status:?}"))),
    };
    let v = &sub.vars;
    let k = v.private.len();
    Ok(InnerPoint {
        precoders: Precoders {
            common: match v.common {
                Some(pc) => pc.value(&x),
                None => vec![Complex::new(0.0, 0.0); n_tx],
            },
            private: v.private.iter().map(|p| p.value(&x)).collect(),
        },
        neg_common_rates: if v.neg_common_rates.is_empty() {
            vec![0.0; k]
        } else {
            v.neg_common_rates.iter().map(|x_k| x[x_k.0].min(0.0)).collect()
        },
        wiretap_alpha: v.wiretap_alpha.iter().map(|a| x[a.0]).collect(),
        objective: out.objective,
    })
}

fn averages_at(precoders: &Precoders<f64>, samples: &[ChannelSet<f64>], noise: f64) -> AveragedCoefficients<f64> {
    let state = update_equalizers_and_weights(precoders, samples, noise);
    compute_averages(&state, samples)
}

/// Largest common rates supported by the sample-average common rates, scaled from `c`.
fn fit_common_rates(rates: &RateBreakdown<f64>, c: &[f64]) -> Vec<f64> {
    let budget = rates.min_common_rate().max(0.0);
    let used: f64 = c.iter().sum();
    let mut out: Vec<f64> = c.iter().map(|x| x.max(0.0)).collect();
    if used > budget && used > 0.0 {
        out.iter_mut().for_each(|x| *x *= budget / used);
    }
    out
}

fn wasr(rates: &RateBreakdown<f64>, common_rates: &[f64], weights: &[f64]) -> f64 {
    (0..weights.len())
        .map(|k| weights[k] * (common_rates[k] + rates.rate_private[k]))
        .sum()
}

struct AoRun {
    state: AoState,
    common_rates: Vec<f64>,
    trace: Vec<IterationRecord>,
    converged: bool,
}

/// Penalty on the secrecy slacks of the inner problem, large against the objective scale.
fn slack_penalty(spec: &SecrecySpec<f64>) -> f64 {
    100.0 * spec.weights.iter().sum::<f64>().max(1.0)
}

fn run_from(
    start: Precoders<f64>,
    samples: &[ChannelSet<f64>],
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &AoOptions,
) -> Result<AoRun> {
    let k = spec.n_users();
    let mut p = start;
    let penalty = Some(slack_penalty(spec));
    let mut state = AoState {
        outer: 0,
        precoders: p.clone(),
        neg_common_rates: vec![0.0; k],
        wiretap_alpha: Vec::new(),
        outer_trace: Vec::new(),
        inner_trace: Vec::new(),
    };
    let rates0 = saf_rates(samples, &p, options.noise)?;
    let mut c = if options.scheme.has_common_stream() {
        vec![rates0.min_common_rate().max(0.0) / k as f64; k]
    } else {
        vec![0.0; k]
    };
    let mut prev_wasr = wasr(&rates0, &c, &spec.weights);
    let mut trace = Vec::new();
    let mut converged = false;
    'outer: for n in 1..=options.max_outer {
        let avg = averages_at(&p, samples, options.noise);
        let mut expansion = p.clone();
        let mut inner_prev = f64::INFINITY;
        let mut point = None;
        let mut inner_trace = Vec::new();
        for _ in 0..options.max_inner {
            let sub = build_inner_subproblem(&avg, &expansion, spec, power, options.scheme, options.noise, penalty)?;
            let next = match solve_inner(&sub, p.n_tx(), options.solver_tolerance) {
                Ok(x) => x,
                Err(Error::NumericalFailure(_) | Error::Infeasible) if n > 1 || point.is_some() => {
                    if point.is_none() {
                        break 'outer;
                    }
                    break;
                }
                Err(e) => return Err(e),
            };
            let delta = (next.objective - inner_prev).abs();
            inner_prev = next.objective;
            inner_trace.push(next.objective);
            expansion = next.precoders.clone();
            point = Some(next);
            if delta <= options.inner_tolerance {
                break;
            }
        }
        let Some(point) = point else { break };
        p = point.precoders;
        state = AoState {
            outer: n,
            precoders: p.clone(),
            neg_common_rates: point.neg_common_rates.clone(),
            wiretap_alpha: point.wiretap_alpha.clone(),
            outer_trace: {
                let mut t = std::mem::take(&mut state.outer_trace);
                t.push(point.objective);
                t
            },
            inner_trace,
        };
        let rates = saf_rates(samples, &p, options.noise)?;
        c = fit_common_rates(&rates, &point.neg_common_rates.iter().map(|x| -x).collect::<Vec<_>>());
        let value = wasr(&rates, &c, &spec.weights);
        trace.push(IterationRecord {
            iteration: n,
            objective: point.objective,
            wsr: value,
            common_rates: c.clone(),
            private_rates: rates.rate_private.clone(),
        });
        if (value - prev_wasr).abs() <= options.outer_tolerance {
            converged = true;
            break;
        }
        prev_wasr = value;
    }
    Ok(AoRun {
        state,
        common_rates: c,
        trace,
        converged,
    })
}

fn finish(run: AoRun, samples: &[ChannelSet<f64>], spec: &SecrecySpec<f64>, options: &AoOptions, kappa: Option<f64>) -> Result<PrecoderSolution> {
    // wiretap rates are re-evaluated with fresh equalizers, i.e. the exact sample averages
    let rates = saf_rates(samples, &run.state.precoders, options.noise)?;
    let common_rates = fit_common_rates(&rates, &run.common_rates);
    let value = wasr(&rates, &common_rates, &spec.weights);
    let violation = secrecy_violation(&rates, &spec.thresholds);
    Ok(PrecoderSolution {
        scheme: options.scheme,
        precoders: run.state.precoders,
        common_rates,
        wsr: value,
        rates,
        iterations: run.trace.len(),
        trace: run.trace,
        converged: run.converged,
        secrecy_ok: violation <= options.feasibility_tolerance,
        max_secrecy_violation: violation,
        kappa,
    })
}

fn start_precoders(start: &WarmStart, estimate: &ChannelSet<f64>, power: f64, scheme: Scheme) -> Result<Precoders<f64>> {
    let mut p = start.precoders.clone();
    p.check_against(estimate)?;
    if !scheme.has_common_stream() {
        p.common.iter_mut().for_each(|x| *x = Complex::new(0.0, 0.0));
    }
    let total = p.total_power();
    if total > power {
        p = p.scaled((power / total).sqrt());
    }
    Ok(p)
}

fn better(a: &PrecoderSolution, b: &PrecoderSolution) -> bool {
    match (a.secrecy_ok, b.secrecy_ok) {
        (true, false) => true,
        (false, true) => false,
        _ => a.wsr > b.wsr,
    }
}

/// Alternating optimization on a fixed sample set drawn around `estimate`.
///
/// A warm start that no run improves on is returned unchanged, with an empty trace.
pub fn solve_wasr_with_samples(
    estimate: &ChannelSet<f64>,
    samples: &[ChannelSet<f64>],
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &AoOptions,
) -> Result<PrecoderSolution> {
    if spec.n_users() != estimate.n_users() {
        return Err(Error::Dimension("secrecy spec and channels disagree on the user count".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    check_threshold_capacity(estimate, spec, power, options.noise)?;
    let kappa = if options.scheme.has_common_stream() { options.kappa } else { 0.0 };
    let mut starts = vec![(Some(options.kappa), initial_precoders(estimate, power, kappa)?)];
    for ws in &options.warm_starts {
        starts.push((None, start_precoders(ws, estimate, power, options.scheme)?));
    }
    let mut kept = Vec::new();
    for (ws, (_, p)) in options.warm_starts.iter().zip(&starts[1..]) {
        // the warm start itself competes, so iterating away from it never loses WASR
        let common_rates = if options.scheme.has_common_stream() { ws.common_rates.clone() } else { vec![0.0; ws.common_rates.len()] };
        let run = AoRun {
            state: AoState {
                outer: 0,
                precoders: p.clone(),
                neg_common_rates: common_rates.iter().map(|c| -c).collect(),
                wiretap_alpha: Vec::new(),
                outer_trace: Vec::new(),
                inner_trace: Vec::new(),
            },
            common_rates,
            trace: Vec::new(),
            converged: true,
        };
        kept.push(finish(run, samples, spec, options, None));
    }
    let mut best: Option<PrecoderSolution> = kept.into_iter().filter_map(|r| r.ok()).reduce(|a, b| if better(&b, &a) { b } else { a });
    let mut first_err = None;
    for (kappa, start) in starts {
        match run_from(start, samples, spec, power, options).and_then(|r| finish(r, samples, spec, options, kappa)) {
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
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::NumericalFailure("no start produced a solution".into())),
    }
}

/// Weighted average sum-rate maximization for one channel estimate: draws `M` samples
/// with `options.seed` and runs the alternating optimization from the estimate-based
/// initialization (plus any warm starts).
pub fn solve_wesr(csit: &CsitModel<f64>, spec: &SecrecySpec<f64>, power: f64, options: &AoOptions) -> Result<PrecoderSolution> {
    let samples = sample_csit(csit, options.samples, options.seed)?;
    solve_wasr_with_samples(&csit.estimate, &samples, spec, power, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_channels;

    #[test]
    fn saf_of_identical_samples_is_instantaneous() {
        let ch = random_channels::<f64>(2, 2, 1).unwrap();
        let p = initial_precoders(&ch, 10.0, 0.5).unwrap();
        let one = compute_rates(&ch, &p, 1.0).unwrap();
        let saf = saf_rates(&[ch.clone(), ch.clone(), ch], &p, 1.0).unwrap();
        for k in 0..2 {
            assert!((one.rate_common[k] - saf.rate_common[k]).abs() < 1e-14);
            assert!((one.rate_private[k] - saf.rate_private[k]).abs() < 1e-14);
            assert!((one.secrecy[k] - saf.secrecy[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn inner_problem_uses_no_exponential_cones() {
        let ch = random_channels::<f64>(2, 2, 2).unwrap();
        let p = initial_precoders(&ch, 100.0, 0.5).unwrap();
        let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
        let avg = averages_at(&p, std::slice::from_ref(&ch), 1.0);
        let sub = build_inner_subproblem(&avg, &p, &spec, 100.0, Scheme::RateSplitting, 1.0, None).unwrap();
        assert!(!sub.problem.cone_families().contains(&crate::conic::ConeFamily::Exponential));
        assert_eq!(sub.problem.count_labelled("wiretap_wmse"), 2);
        assert_eq!(sub.problem.count_labelled("common_wmse"), 2);
    }

    #[test]
    fn linearized_wiretap_row_is_tangent_at_expansion() {
        let ch = random_channels::<f64>(3, 2, 3).unwrap();
        let p = initial_precoders(&ch, 50.0, 0.3).unwrap();
        let avg = averages_at(&p, std::slice::from_ref(&ch), 1.0);
        let spec = SecrecySpec::uniform(0.1, vec![1.0; 3]).unwrap();
        let sub = build_inner_subproblem(&avg, &p, &spec, 50.0, Scheme::RateSplitting, 1.0, None).unwrap();
        let mut x = vec![0.0; sub.problem.n_vars()];
        let v = &sub.vars;
        for (var, val) in v.common.iter().zip([&p.common]).chain(v.private.iter().zip(&p.private)) {
            for (i, z) in val.iter().enumerate() {
                x[var.re(i).0] = z.re;
                x[var.im(i).0] = z.im;
            }
        }
        for (idx, &(owner, eav)) in secrecy_pairs(&spec).iter().enumerate() {
            let id = StreamId::Wiretap { owner, eavesdropper: eav };
            let lin = linearized_wiretap(avg.get(id), &v.private, &p, 1.0);
            let exact = avg.get(id).wmse_at(&p, 1.0);
            assert!((lin.eval(&x) - exact).abs() < 1e-10, "pair {idx}");
        }
    }
}
