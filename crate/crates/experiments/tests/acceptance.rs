//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Lines are written straight to stdout so they show up without `--nocapture`.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use secrsma::ao::{saf_rates, solve_wasr_with_samples, solve_wesr, AoOptions};
use secrsma::model::{compute_rates, derive_seed, random_channels, random_real_channels, specific_channels, CsitModel, SecrecySpec};
use secrsma::oracle::{check_rate_wmmse, check_taylor_bounds, grid_oracle_wsr, GridSpec};
use secrsma::sca::{solve_wsr, ScaOptions};
use secrsma::solution::{PrecoderSolution, Scheme};
use secrsma_experiments::config::{AlgorithmConfig, SchemeName};
use secrsma_experiments::output::write_table;
use secrsma_experiments::runner::{power_from_snr, solve_ladder, LadderEntry, Problem};
use secrsma_experiments::{run_sweep, ExperimentConfig};

const SEED: u64 = 20_240_601;
const LADDER: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];

enum Outcome {
    Pass(String),
    Fail(String),
    /// Reported but not gating.
    Soft(bool, String),
}

fn report(id: &str, outcome: Outcome) -> bool {
    let (tag, msg, gate) = match outcome {
        Outcome::Pass(m) => ("PASS", m, true),
        Outcome::Fail(m) => ("FAIL", m, false),
        Outcome::Soft(ok, m) => (if ok { "PASS" } else { "SOFT-FAIL" }, m, true),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {id}: {tag} {msg}");
    let _ = out.flush();
    gate
}

fn verdict(ok: bool, msg: String) -> Outcome {
    if ok {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn rate_wmmse_identity() -> Outcome {
    let t = Instant::now();
    let r = check_rate_wmmse(200, SEED);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        r.max_residual() <= 1e-9 && secs < 5.0,
        format!(
            "max |xi - (1 - R)| common {:.2e} private {:.2e} wiretap {:.2e} over {} instances in {secs:.2}s",
            r.common_residual, r.private_residual, r.wiretap_residual, r.instances
        ),
    )
}

fn taylor_surrogates() -> Outcome {
    let t = Instant::now();
    let r = check_taylor_bounds(10_000, SEED);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        r.exp2_violation <= 1e-12 && r.sinr_violation <= 1e-12 && r.wiretap_wmse_violation <= 1e-12 && r.tangency_residual <= 1e-10 && secs < 5.0,
        format!(
            "exp2 {:.2e} sinr {:.2e} wiretap-wmse {:.2e} tangency {:.2e} over {} samples in {secs:.2}s (printed bilinear form over-estimates in {} samples)",
            r.exp2_violation, r.sinr_violation, r.wiretap_wmse_violation, r.tangency_residual, r.samples, r.wiretap_bilinear_overshoot_count
        ),
    )
}

fn largest_drop(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

fn largest_rise(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

fn sca_monotone_convergence() -> Outcome {
    let ch = specific_channels(1.0, 2.0 * std::f64::consts::PI / 9.0, 2).unwrap();
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let opts = ScaOptions {
        kappa: 0.5,
        tolerance: 1e-4,
        retry_on_violation: false,
        ..ScaOptions::default()
    };
    let t = Instant::now();
    let sol = solve_wsr(&ch, &spec, power_from_snr(20.0), &opts).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let drop = largest_drop(sol.trace.iter().map(|r| r.objective));
    verdict(
        drop <= 1e-7 && sol.converged && sol.iterations <= 100 && secs < 60.0,
        format!(
            "WSR {:.6} after {} iterations (converged {}), largest decrease {drop:.2e}, {secs:.2}s",
            sol.wsr, sol.iterations, sol.converged
        ),
    )
}

struct InstanceRuns {
    perfect: Vec<LadderEntry>,
    imperfect: Vec<LadderEntry>,
}

fn entry(runs: &[LadderEntry], scheme: Scheme, threshold: f64) -> &LadderEntry {
    runs.iter().find(|e| e.scheme == scheme && e.threshold == threshold).expect("ladder covers every threshold")
}

/// The 20 random K=2, N_t=4 instances at 20 dB, solved over the threshold ladder under
/// perfect CSIT and imperfect CSIT with 100 conditional samples.
fn random_instances() -> Vec<InstanceRuns> {
    let alg = AlgorithmConfig::default();
    let power = power_from_snr(20.0);
    let schemes = [SchemeName::Rs, SchemeName::Mulp];
    (0..20u64)
        .map(|i| {
            let seed = derive_seed(SEED, i);
            let ch = random_channels::<f64>(2, 4, seed).unwrap();
            let perfect = solve_ladder(&Problem::Perfect(ch.clone()), &[1.0, 1.0], &LADDER, power, &alg, &schemes);
            let var = CsitModel::<f64>::error_variance_for(1.0, 0.6, power);
            let problem = Problem::Imperfect {
                csit: CsitModel::new(ch, vec![var; 2]).unwrap(),
                samples: 100,
                seed: derive_seed(seed, 1),
            };
            let imperfect = solve_ladder(&problem, &[1.0, 1.0], &LADDER, power, &alg, &schemes);
            InstanceRuns { perfect, imperfect }
        })
        .collect()
}

fn secrecy_feasibility(runs: &[InstanceRuns]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for (i, inst) in runs.iter().enumerate() {
        let ch = random_channels::<f64>(2, 4, derive_seed(SEED, i as u64)).unwrap();
        for scheme in [Scheme::RateSplitting, Scheme::Mulp] {
            match &entry(&inst.perfect, scheme, 0.1).result {
                Ok(sol) => {
                    let rates = compute_rates(&ch, &sol.precoders, 1.0).unwrap();
                    for k in 0..2 {
                        let shortfall = 0.1 - rates.secrecy[k];
                        worst = worst.max(shortfall);
                        if shortfall > 1e-3 {
                            failures += 1;
                        }
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    verdict(
        failures == 0,
        format!("{failures} failing (instance, scheme, user) triples of 80; largest shortfall below R^th {worst:.2e}"),
    )
}

fn rs_nests_mulp(runs: &[InstanceRuns]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (i, inst) in runs.iter().enumerate() {
        for (mode, set) in [("perfect", &inst.perfect), ("imperfect", &inst.imperfect)] {
            let rs = entry(set, Scheme::RateSplitting, 0.1).result.as_ref();
            let mulp = entry(set, Scheme::Mulp, 0.1).result.as_ref();
            match (rs, mulp) {
                (Ok(r), Ok(m)) => {
                    let gap = r.wsr - m.wsr;
                    worst = worst.min(gap);
                    if gap < -1e-6 {
                        failures.push(format!("{mode}#{i}"));
                    }
                }
                _ => failures.push(format!("{mode}#{i} (solver error)")),
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("smallest WSR(RS) - WSR(MULP) {worst:.3e} over 40 cases; failing: {failures:?}"),
    )
}

/// WSR of a ladder entry, with unsolved or secrecy-infeasible results counted as `−∞`.
fn feasible_wsr(e: &LadderEntry) -> f64 {
    match &e.result {
        Ok(PrecoderSolution { secrecy_ok: true, wsr, .. }) => *wsr,
        _ => f64::NEG_INFINITY,
    }
}

fn threshold_monotonicity(runs: &[InstanceRuns]) -> Outcome {
    let grid = [0.0, 0.25, 0.5, 1.0];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut flat = 0;
    for (i, inst) in runs.iter().enumerate() {
        for (mode, set) in [("perfect", &inst.perfect), ("imperfect", &inst.imperfect)] {
            for scheme in [Scheme::RateSplitting, Scheme::Mulp] {
                let w: Vec<f64> = grid.iter().map(|&t| feasible_wsr(entry(set, scheme, t))).collect();
                let rise = w
                    .windows(2)
                    .map(|p| if p[1].is_finite() { p[1] - p[0] } else { 0.0 })
                    .fold(0.0, f64::max);
                worst = worst.max(rise);
                if rise > 1e-4 || !w[0].is_finite() {
                    failures.push(format!("{mode}/{}#{i}", scheme.label()));
                }
            }
        }
        let w0 = feasible_wsr(entry(&inst.perfect, Scheme::RateSplitting, 0.0));
        let w25 = feasible_wsr(entry(&inst.perfect, Scheme::RateSplitting, 0.25));
        if w25 >= w0 - 1e-2 {
            flat += 1;
        }
    }
    let flat_share = flat as f64 / runs.len() as f64;
    verdict(
        failures.is_empty() && flat_share >= 0.8,
        format!(
            "largest WSR increase with R^th {worst:.2e}; failing: {failures:?}; flat region holds on {flat}/{} instances",
            runs.len()
        ),
    )
}

fn oracle_lower_bound() -> Outcome {
    let alg = AlgorithmConfig::default();
    let power = power_from_snr(20.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for i in 0..5u64 {
        let ch = random_real_channels::<f64>(2, 2, derive_seed(SEED + 7, i)).unwrap();
        let spec = SecrecySpec::uniform(0.2, vec![1.0, 1.0]).unwrap();
        let t = Instant::now();
        let oracle = grid_oracle_wsr(&ch, &spec, power, 1.0, GridSpec::default()).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let runs = solve_ladder(&Problem::Perfect(ch), &[1.0, 1.0], &[0.2], power, &alg, &[SchemeName::Rs]);
        let sca = feasible_wsr(&runs[0]);
        ok &= sca >= oracle.wsr - 1e-3 && secs < 120.0;
        lines.push(format!("#{i} SCA {sca:.5} oracle {:.5} ({secs:.1}s)", oracle.wsr));
    }
    verdict(ok, lines.join("; "))
}

fn ao_consistency() -> Vec<Outcome> {
    let power = power_from_snr(20.0);
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let mut worst_rise = 0.0f64;
    let mut worst_saf = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut gaps = Vec::new();
    for i in 0..5u64 {
        let ch = random_channels::<f64>(2, 2, derive_seed(SEED + 8, i)).unwrap();
        let ao = solve_wasr_with_samples(&ch, std::slice::from_ref(&ch), &spec, power, &AoOptions::default()).unwrap();
        worst_rise = worst_rise.max(largest_rise(ao.trace.iter().map(|r| r.objective)));
        let inst = compute_rates(&ch, &ao.precoders, 1.0).unwrap();
        let saf = saf_rates(std::slice::from_ref(&ch), &ao.precoders, 1.0).unwrap();
        for k in 0..2 {
            worst_saf = worst_saf
                .max((inst.rate_common[k] - saf.rate_common[k]).abs())
                .max((inst.rate_private[k] - saf.rate_private[k]).abs())
                .max((inst.secrecy[k] - saf.secrecy[k]).abs());
        }
        let inst_wsr = inst.min_common_rate() + inst.rate_private.iter().sum::<f64>();
        let sca = solve_wsr(&ch, &spec, power, &ScaOptions::default()).unwrap();
        let gap = (sca.wsr - inst_wsr) / sca.wsr;
        worst_gap = worst_gap.max(gap.abs());
        gaps.push(format!("{gap:+.2e}"));
    }
    // one genuinely stochastic run on the specific channel
    let ch = specific_channels(1.0, 2.0 * std::f64::consts::PI / 9.0, 2).unwrap();
    let var = CsitModel::<f64>::error_variance_for(1.0, 0.6, power);
    let csit = CsitModel::new(ch, vec![var; 2]).unwrap();
    let opts = AoOptions {
        samples: 100,
        seed: SEED,
        ..AoOptions::default()
    };
    let ao = solve_wesr(&csit, &spec, power, &opts).unwrap();
    worst_rise = worst_rise.max(largest_rise(ao.trace.iter().map(|r| r.objective)));
    vec![
        verdict(
            worst_rise <= 1e-7 && worst_saf <= 1e-12,
            format!("largest outer objective increase {worst_rise:.2e} over 6 runs; single-sample SAF vs instantaneous rates {worst_saf:.2e}"),
        ),
        Outcome::Soft(
            worst_gap <= 0.03,
            format!("relative WSR gap to the perfect-CSIT SCA on 5 channels: {gaps:?} (soft, 3%)"),
        ),
    ]
}

fn mmse_closed_forms() -> Outcome {
    let r = check_rate_wmmse(100, SEED + 9);
    verdict(
        r.equalizer_violations == 0 && r.weight_violations == 0,
        format!(
            "{} of {} perturbed equalizers and {} of {} grid weights beat the closed forms",
            r.equalizer_violations, r.equalizer_probes, r.weight_violations, r.weight_probes
        ),
    )
}

fn reproducibility() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig2.toml");
    let mut cfg = ExperimentConfig::load(std::path::Path::new(path)).unwrap();
    cfg.scenario.samples = 20;
    let table = |cfg: &ExperimentConfig| {
        let mut buf = Vec::new();
        write_table(&mut buf, &run_sweep(cfg), cfg.scenario.users).unwrap();
        buf
    };
    let a = table(&cfg);
    let b = table(&cfg);
    verdict(
        a == b && !a.is_empty(),
        format!("two runs of configs/fig2.toml (20 conditional samples) give {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

fn guarded(id: &str, f: impl FnOnce() -> Outcome) -> bool {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => report(id, o),
        Err(_) => report(id, Outcome::Fail("panicked".into())),
    }
}

#[test]
fn acceptance() {
    let mut ok = true;
    ok &= guarded("1 rate-WMMSE identity", rate_wmmse_identity);
    ok &= guarded("2 Taylor surrogates", taylor_surrogates);
    ok &= guarded("3 Algorithm 1 convergence", sca_monotone_convergence);
    match catch_unwind(random_instances) {
        Ok(runs) => {
            ok &= guarded("4 secrecy feasibility", || secrecy_feasibility(&runs));
            ok &= guarded("5 RS >= MULP", || rs_nests_mulp(&runs));
            ok &= guarded("6 threshold monotonicity", || threshold_monotonicity(&runs));
        }
        Err(_) => {
            for id in ["4 secrecy feasibility", "5 RS >= MULP", "6 threshold monotonicity"] {
                ok &= report(id, Outcome::Fail("instance solves panicked".into()));
            }
        }
    }
    ok &= guarded("7 oracle lower bound", oracle_lower_bound);
    match catch_unwind(ao_consistency) {
        Ok(outcomes) => {
            let mut it = outcomes.into_iter();
            ok &= report("8 Algorithm 2 convergence", it.next().unwrap());
            ok &= report("8 Algorithm 2 vs Algorithm 1", it.next().unwrap());
        }
        Err(_) => ok &= report("8 Algorithm 2 convergence", Outcome::Fail("panicked".into())),
    }
    ok &= guarded("9 MMSE closed forms", mmse_closed_forms);
    ok &= guarded("10 reproducibility", reproducibility);
    assert!(ok, "at least one acceptance criterion failed");
}
