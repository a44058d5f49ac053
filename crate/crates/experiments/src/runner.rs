//! Sweep execution: instances × SNR × CSIT mode cells, each solved as a threshold ladder.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use secrsma::ao::AoOptions;
use secrsma::model::{derive_seed, random_channels, specific_channels, ChannelSet, CsitModel, SecrecySpec};
use secrsma::mulp::{solve_mulp_wesr, solve_mulp_wsr};
use secrsma::sca::{solve_wsr, ScaOptions, WarmStart};
use secrsma::solution::{PrecoderSolution, Scheme};
use secrsma::{ao, Error};

use crate::config::{AlgorithmConfig, CsitMode, ExperimentConfig, ScenarioKind, SchemeName};

/// Channel knowledge handed to the solvers.
#[derive(Debug, Clone)]
pub enum Problem {
    Perfect(ChannelSet<f64>),
    Imperfect {
        csit: CsitModel<f64>,
        samples: usize,
        seed: u64,
    },
}

/// Transmit power for an SNR in dB with unit noise.
pub fn power_from_snr(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

pub fn sca_options(alg: &AlgorithmConfig, scheme: Scheme, kappa: f64) -> ScaOptions {
    ScaOptions {
        kappa,
        tolerance: alg.tolerance,
        max_iterations: alg.max_iterations,
        solver_tolerance: alg.solver_tolerance,
        feasibility_tolerance: alg.feasibility_tolerance,
        scheme,
        ..ScaOptions::default()
    }
}

pub fn ao_options(alg: &AlgorithmConfig, scheme: Scheme, kappa: f64, samples: usize, seed: u64) -> AoOptions {
    AoOptions {
        kappa,
        outer_tolerance: alg.tolerance,
        inner_tolerance: alg.inner_tolerance,
        max_outer: alg.max_iterations,
        max_inner: alg.max_inner,
        samples,
        seed,
        solver_tolerance: alg.solver_tolerance,
        feasibility_tolerance: alg.feasibility_tolerance,
        scheme,
        ..AoOptions::default()
    }
}

/// One solve without extra starting points (used for convergence traces).
pub fn solve_single(problem: &Problem, spec: &SecrecySpec<f64>, power: f64, alg: &AlgorithmConfig, scheme: Scheme, kappa: f64) -> secrsma::Result<PrecoderSolution> {
    match problem {
        Problem::Perfect(ch) => {
            let opts = ScaOptions {
                retry_on_violation: false,
                ..sca_options(alg, scheme, kappa)
            };
            solve_wsr(ch, spec, power, &opts)
        }
        Problem::Imperfect { csit, samples, seed } => ao::solve_wesr(csit, spec, power, &ao_options(alg, scheme, kappa, *samples, *seed)),
    }
}

fn solve_with(problem: &Problem, spec: &SecrecySpec<f64>, power: f64, alg: &AlgorithmConfig, scheme: Scheme, warm: Vec<WarmStart>) -> secrsma::Result<PrecoderSolution> {
    match problem {
        Problem::Perfect(ch) => {
            let opts = ScaOptions {
                warm_starts: warm,
                ..sca_options(alg, scheme, alg.kappa)
            };
            match scheme {
                Scheme::Mulp => solve_mulp_wsr(ch, spec, power, &opts),
                Scheme::RateSplitting => solve_wsr(ch, spec, power, &opts),
            }
        }
        Problem::Imperfect { csit, samples, seed } => {
            let mut warm = warm;
            // the perfect-CSIT optimum on the estimate is a cheap start that is often SAF-feasible
            if let Ok(sol) = solve_wsr(&csit.estimate, spec, power, &sca_options(alg, scheme, alg.kappa)) {
                warm.push(WarmStart::from(&sol));
            }
            let opts = AoOptions {
                warm_starts: warm,
                ..ao_options(alg, scheme, alg.kappa, *samples, *seed)
            };
            match scheme {
                Scheme::Mulp => solve_mulp_wesr(csit, spec, power, &opts),
                Scheme::RateSplitting => ao::solve_wesr(csit, spec, power, &opts),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderEntry {
    pub scheme: Scheme,
    pub threshold: f64,
    pub result: secrsma::Result<PrecoderSolution>,
    pub wall_ms: f64,
}

/// Solves every threshold for MULP and RS, largest threshold first.
///
/// MULP at each threshold starts from the MULP solution of the next larger threshold;
/// RS additionally starts from the MULP solution at the same threshold. Under imperfect
/// CSIT both also start from the perfect-CSIT solution on the estimate. A larger
/// threshold only shrinks the feasible set, so these starts keep the returned WSR
/// nonincreasing in the threshold and RS no worse than MULP. MULP is solved even when
/// only RS is requested. Entries come back in the order of `thresholds`.
pub fn solve_ladder(problem: &Problem, weights: &[f64], thresholds: &[f64], power: f64, alg: &AlgorithmConfig, schemes: &[SchemeName]) -> Vec<LadderEntry> {
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[b].total_cmp(&thresholds[a]).then(a.cmp(&b)));
    let want_rs = schemes.contains(&SchemeName::Rs);
    let want_mulp = schemes.contains(&SchemeName::Mulp);
    let mut mulp: Vec<Option<LadderEntry>> = vec![None; thresholds.len()];
    let mut rs: Vec<Option<LadderEntry>> = vec![None; thresholds.len()];
    let mut prev_mulp: Option<WarmStart> = None;
    let mut prev_rs: Option<WarmStart> = None;
    for &i in &order {
        let t = thresholds[i];
        let spec = match SecrecySpec::uniform(t, weights.to_vec()) {
            Ok(s) => s,
            Err(e) => {
                for (slot, scheme) in [(&mut mulp[i], Scheme::Mulp), (&mut rs[i], Scheme::RateSplitting)] {
                    *slot = Some(LadderEntry {
                        scheme,
                        threshold: t,
                        result: Err(e.clone()),
                        wall_ms: 0.0,
                    });
                }
                continue;
            }
        };
        let start = Instant::now();
        let m = solve_with(problem, &spec, power, alg, Scheme::Mulp, prev_mulp.iter().cloned().collect());
        let m_ms = start.elapsed().as_secs_f64() * 1e3;
        // infeasible iterates would pull the next solve away from the secrecy constraints
        let m_warm = m.as_ref().ok().filter(|s| s.secrecy_ok).map(WarmStart::from);
        if want_rs {
            let warm: Vec<WarmStart> = m_warm.iter().chain(prev_rs.iter()).cloned().collect();
            let start = Instant::now();
            let r = solve_with(problem, &spec, power, alg, Scheme::RateSplitting, warm);
            let r_ms = start.elapsed().as_secs_f64() * 1e3;
            if let Some(sol) = r.as_ref().ok().filter(|s| s.secrecy_ok) {
                prev_rs = Some(WarmStart::from(sol));
            }
            rs[i] = Some(LadderEntry {
                scheme: Scheme::RateSplitting,
                threshold: t,
                result: r,
                wall_ms: r_ms,
            });
        }
        if m_warm.is_some() {
            prev_mulp = m_warm;
        }
        mulp[i] = Some(LadderEntry {
            scheme: Scheme::Mulp,
            threshold: t,
            result: m,
            wall_ms: m_ms,
        });
    }
    let mut out = Vec::new();
    for name in schemes {
        let col = match name {
            SchemeName::Rs if want_rs => &mut rs,
            SchemeName::Mulp if want_mulp => &mut mulp,
            _ => continue,
        };
        out.extend(col.iter_mut().filter_map(Option::take));
    }
    out
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: ScenarioKind,
    /// Instance index, or `mean` for the trial average of a random scenario.
    pub instance: String,
    pub seed: Option<u64>,
    pub scheme: Scheme,
    pub csit: CsitMode,
    pub snr_db: f64,
    pub threshold: f64,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub wsr: Option<f64>,
    pub common_rates: Vec<f64>,
    pub private_rates: Vec<f64>,
    pub secrecy_rates: Vec<f64>,
    pub common_power_fraction: Option<f64>,
    pub private_power_fractions: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    /// `ok`, the solver error, or the secrecy shortfall of an infeasible solution.
    pub status: String,
    /// Kept out of the table so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_ms: f64,
}

impl ResultRow {
    /// Row-level invariants: power fractions sum to at most one and a feasible flag
    /// implies every secrecy rate meets the threshold.
    pub fn check(&self, feasibility_tolerance: f64) -> Result<(), String> {
        if let Some(c) = self.common_power_fraction {
            let total: f64 = c + self.private_power_fractions.iter().sum::<f64>();
            if total > 1.0 + 1e-6 {
                return Err(format!("power fractions sum to {total}"));
            }
        }
        if self.feasible && self.threshold > 0.0 {
            if let Some(s) = self.secrecy_rates.iter().find(|&&s| s < self.threshold - feasibility_tolerance) {
                return Err(format!("feasible row has secrecy rate {s} below {}", self.threshold));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Instance {
    index: usize,
    seed: u64,
    theta: Option<f64>,
}

#[derive(Debug, Clone)]
struct Cell {
    instance: Instance,
    snr_index: usize,
    snr_db: f64,
    csit: CsitMode,
}

fn instances(cfg: &ExperimentConfig) -> Vec<Instance> {
    let s = &cfg.scenario;
    match s.kind {
        ScenarioKind::Specific => s
            .thetas
            .iter()
            .enumerate()
            .map(|(i, &t)| Instance {
                index: i,
                seed: derive_seed(s.seed, i as u64),
                theta: Some(t),
            })
            .collect(),
        ScenarioKind::Random => (0..s.trials)
            .map(|i| Instance {
                index: i,
                seed: derive_seed(s.seed, i as u64),
                theta: None,
            })
            .collect(),
    }
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for inst in instances(cfg) {
        for (si, &snr) in cfg.sweep.snr_db.iter().enumerate() {
            for &csit in &cfg.scenario.csit {
                out.push(Cell {
                    instance: inst.clone(),
                    snr_index: si,
                    snr_db: snr,
                    csit,
                });
            }
        }
    }
    out
}

/// Builds the solver input of a cell.
///
/// Random imperfect-CSIT instances scale the drawn `CN(0, 1)` channel to `CN(0, 1 − σ_e²)`
/// so that estimate plus error keeps unit entry variance. The sample seed depends on the
/// instance and SNR only, so every scheme and threshold sees the same sample set.
fn problem_for(cfg: &ExperimentConfig, cell: &Cell) -> secrsma::Result<Problem> {
    let s = &cfg.scenario;
    let channels = match cell.instance.theta {
        Some(theta) => specific_channels(s.gamma, theta, s.antennas)?,
        None => random_channels(s.users, s.antennas, cell.instance.seed)?,
    };
    Ok(match cell.csit {
        CsitMode::Perfect => Problem::Perfect(channels),
        CsitMode::Imperfect => {
            let power = power_from_snr(cell.snr_db);
            let var = CsitModel::<f64>::error_variance_for(s.error_quality, s.error_exponent, power);
            if var >= 1.0 && s.kind == ScenarioKind::Random {
                return Err(Error::InvalidParameter("CSIT error variance must be below one".into()));
            }
            let estimate = if s.kind == ScenarioKind::Random {
                let scale = (1.0 - var).sqrt();
                let users = channels.users().iter().map(|h| h.iter().map(|x| x * scale).collect()).collect();
                ChannelSet::new(users)?
            } else {
                channels
            };
            Problem::Imperfect {
                csit: CsitModel::new(estimate, vec![var; s.users])?,
                samples: s.samples,
                seed: derive_seed(cell.instance.seed, 1_000 + cell.snr_index as u64),
            }
        }
    })
}

fn row(cfg: &ExperimentConfig, cell: &Cell, entry: &LadderEntry) -> ResultRow {
    let s = &cfg.scenario;
    let power = power_from_snr(cell.snr_db);
    let mut row = ResultRow {
        scenario: s.kind,
        instance: cell.instance.index.to_string(),
        seed: Some(cell.instance.seed),
        scheme: entry.scheme,
        csit: cell.csit,
        snr_db: cell.snr_db,
        threshold: entry.threshold,
        theta: cell.instance.theta,
        gamma: (s.kind == ScenarioKind::Specific).then_some(s.gamma),
        wsr: None,
        common_rates: Vec::new(),
        private_rates: Vec::new(),
        secrecy_rates: Vec::new(),
        common_power_fraction: None,
        private_power_fractions: Vec::new(),
        iterations: 0,
        converged: false,
        feasible: false,
        status: "ok".into(),
        wall_ms: entry.wall_ms,
    };
    match &entry.result {
        Ok(sol) => {
            row.wsr = Some(sol.wsr);
            row.common_rates = sol.common_rates.clone();
            row.private_rates = sol.rates.rate_private.clone();
            row.secrecy_rates = sol.rates.secrecy.clone();
            row.common_power_fraction = Some(sol.common_power_fraction(power));
            row.private_power_fractions = sol.private_power_fractions(power);
            row.iterations = sol.iterations;
            row.converged = sol.converged;
            row.feasible = sol.secrecy_ok;
            if !sol.secrecy_ok {
                row.status = format!("secrecy thresholds missed by {:.3e}", sol.max_secrecy_violation);
            }
        }
        Err(e) => row.status = e.to_string(),
    }
    row
}

fn solve_cell(cfg: &ExperimentConfig, cell: &Cell) -> Vec<ResultRow> {
    let power = power_from_snr(cell.snr_db);
    let entries = match problem_for(cfg, cell) {
        Ok(problem) => solve_ladder(&problem, &cfg.scenario.weights, &cfg.sweep.thresholds, power, &cfg.algorithm, &cfg.algorithm.schemes),
        Err(e) => cfg
            .algorithm
            .schemes
            .iter()
            .flat_map(|&s| {
                let e = e.clone();
                cfg.sweep.thresholds.iter().map(move |&t| LadderEntry {
                    scheme: s.into(),
                    threshold: t,
                    result: Err(e.clone()),
                    wall_ms: 0.0,
                })
            })
            .collect(),
    };
    entries.iter().map(|e| row(cfg, cell, e)).collect()
}

fn mean(xs: &[&[f64]]) -> Vec<f64> {
    let n = xs.first().map_or(0, |x| x.len());
    (0..n).map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / xs.len() as f64).collect()
}

/// Trial averages of a random scenario: one row per (SNR, CSIT mode, scheme, threshold),
/// averaging the successful trials.
fn mean_rows(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for &snr in &cfg.sweep.snr_db {
        for &csit in &cfg.scenario.csit {
            for &scheme in &cfg.algorithm.schemes {
                let scheme: Scheme = scheme.into();
                for &t in &cfg.sweep.thresholds {
                    let group: Vec<&ResultRow> = rows
                        .iter()
                        .filter(|r| r.snr_db == snr && r.csit == csit && r.scheme == scheme && r.threshold == t)
                        .collect();
                    let ok: Vec<&ResultRow> = group.iter().copied().filter(|r| r.wsr.is_some()).collect();
                    let n = ok.len();
                    let avg = |f: &dyn Fn(&ResultRow) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n as f64;
                    let vecs = |f: &dyn Fn(&ResultRow) -> &[f64]| mean(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
                    out.push(ResultRow {
                        scenario: cfg.scenario.kind,
                        instance: "mean".into(),
                        seed: None,
                        scheme,
                        csit,
                        snr_db: snr,
                        threshold: t,
                        theta: None,
                        gamma: None,
                        wsr: (n > 0).then(|| avg(&|r| r.wsr.unwrap_or(0.0))),
                        common_rates: vecs(&|r| &r.common_rates),
                        private_rates: vecs(&|r| &r.private_rates),
                        secrecy_rates: vecs(&|r| &r.secrecy_rates),
                        common_power_fraction: (n > 0).then(|| avg(&|r| r.common_power_fraction.unwrap_or(0.0))),
                        private_power_fractions: vecs(&|r| &r.private_power_fractions),
                        iterations: if n > 0 { ok.iter().map(|r| r.iterations).sum::<usize>() / n } else { 0 },
                        converged: n > 0 && ok.iter().all(|r| r.converged),
                        feasible: n > 0 && group.iter().all(|r| r.feasible),
                        status: format!("{n}/{} trials solved", group.len()),
                        wall_ms: ok.iter().map(|r| r.wall_ms).sum::<f64>(),
                    });
                }
            }
        }
    }
    out
}

/// Runs the full grid. Cells run in parallel; rows come back sorted by
/// (instance, SNR, CSIT mode, scheme, threshold) regardless of scheduling, followed by
/// the trial-average rows of a random scenario.
pub fn run_sweep(cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let per_cell: Vec<Vec<ResultRow>> = cells(cfg).par_iter().map(|c| solve_cell(cfg, c)).collect();
    let mut rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    if cfg.scenario.kind == ScenarioKind::Random {
        let means = mean_rows(cfg, &rows);
        rows.extend(means);
    }
    rows
}

/// One iteration of a convergence run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub instance: usize,
    pub theta: Option<f64>,
    pub snr_db: f64,
    pub csit: CsitMode,
    pub scheme: Scheme,
    pub threshold: f64,
    pub kappa: f64,
    pub iteration: usize,
    pub objective: f64,
    pub wsr: f64,
    pub common_rates: Vec<f64>,
    pub private_rates: Vec<f64>,
    /// Whether the run's final solution meets the secrecy thresholds.
    pub feasible: bool,
}

/// Convergence traces for every cell, scheme, threshold and `κ` in `trace_kappas`.
/// Failed runs contribute no records and are returned as messages.
pub fn run_traces(cfg: &ExperimentConfig) -> (Vec<TraceRecord>, Vec<String>) {
    let mut jobs = Vec::new();
    for cell in cells(cfg) {
        for &scheme in &cfg.algorithm.schemes {
            for &t in &cfg.sweep.thresholds {
                for &kappa in &cfg.algorithm.trace_kappas {
                    jobs.push((cell.clone(), Scheme::from(scheme), t, kappa));
                }
            }
        }
    }
    let results: Vec<Result<Vec<TraceRecord>, String>> = jobs
        .par_iter()
        .map(|(cell, scheme, t, kappa)| {
            let tag = format!(
                "instance {} snr {} {} {} threshold {} kappa {}",
                cell.instance.index,
                cell.snr_db,
                cell.csit.label(),
                scheme.label(),
                t,
                kappa
            );
            let problem = problem_for(cfg, cell).map_err(|e| format!("{tag}: {e}"))?;
            let spec = SecrecySpec::uniform(*t, cfg.scenario.weights.clone()).map_err(|e| format!("{tag}: {e}"))?;
            let sol = solve_single(&problem, &spec, power_from_snr(cell.snr_db), &cfg.algorithm, *scheme, *kappa).map_err(|e| format!("{tag}: {e}"))?;
            Ok(sol
                .trace
                .iter()
                .map(|r| TraceRecord {
                    instance: cell.instance.index,
                    theta: cell.instance.theta,
                    snr_db: cell.snr_db,
                    csit: cell.csit,
                    scheme: *scheme,
                    threshold: *t,
                    kappa: *kappa,
                    iteration: r.iteration,
                    objective: r.objective,
                    wsr: r.wsr,
                    common_rates: r.common_rates.clone(),
                    private_rates: r.private_rates.clone(),
                    feasible: sol.secrecy_ok,
                })
                .collect())
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => records.extend(v),
            Err(e) => failures.push(e),
        }
    }
    (records, failures)
}
