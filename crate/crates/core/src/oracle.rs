//! Independent checks: an exhaustive grid search over real 2×2 precoders, sampled
//! checks of the first-order surrogates, and the rate/weighted-MSE identity.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{random_channels, ChannelSet, Precoders, SecrecySpec};
use crate::surrogate::{exp2_tangent, sinr_lower_bound, wiretap_bilinear_exact, wiretap_bilinear_printed};
use crate::wmmse::{compute_averages, mse, update_equalizers_and_weights, wmse, SampleMmse, StreamId};

/// Resolution of the oracle grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of power steps per unit budget (20 gives steps of `0.05 P_t`).
    pub power_steps: usize,
    /// Number of beam angles on `[0, π)` (32 gives steps of `π/32`).
    pub angle_steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            power_steps: 20,
            angle_steps: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best feasible WSR, `−∞` if no grid point meets the thresholds.
    pub wsr: f64,
    pub precoders: Precoders<f64>,
    pub common_rates: Vec<f64>,
    pub candidates: u64,
}

#[derive(Clone, Copy)]
struct Candidate {
    wsr: f64,
    // (power index, angle index) for the common and both private precoders
    idx: [(usize, usize); 3],
}

fn log2_1p(x: f64) -> f64 {
    (1.0 + x).log2()
}

/// Exhaustive search over real precoders `p_i = √q_i [cos φ_i, sin φ_i]` for two users and
/// two antennas. Power splits cover the simplex `q_c + q_1 + q_2 <= P_t` on the grid, the
/// common rate goes to the largest-weight user, and secrecy is checked on the true rates.
pub fn grid_oracle_wsr(
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    noise: f64,
    grid: GridSpec,
) -> Result<OracleResult> {
    if channels.n_users() != 2 || channels.n_tx() != 2 {
        return Err(Error::InvalidParameter("grid oracle needs two users and two antennas".into()));
    }
    if !channels.is_real() {
        return Err(Error::InvalidParameter("grid oracle needs real channels".into()));
    }
    if grid.power_steps == 0 || grid.angle_steps == 0 {
        return Err(Error::InvalidParameter("grid must have at least one step".into()));
    }
    let h: Vec<[f64; 2]> = (0..2).map(|k| [channels.user(k)[0].re, channels.user(k)[1].re]).collect();
    let angles: Vec<f64> = (0..grid.angle_steps)
        .map(|a| a as f64 * std::f64::consts::PI / grid.angle_steps as f64)
        .collect();
    // gain[k][a] = (h_kᵀ [cos φ_a, sin φ_a])²
    let gain: Vec<Vec<f64>> = h
        .iter()
        .map(|hk| angles.iter().map(|&phi| (hk[0] * phi.cos() + hk[1] * phi.sin()).powi(2)).collect())
        .collect();
    let n = grid.power_steps;
    let splits: Vec<[usize; 3]> = (0..=n)
        .flat_map(|a| (0..=n - a).flat_map(move |b| (0..=n - a - b).map(move |c| [a, b, c])))
        .collect();
    let best_user = (0..2).fold(0, |b, i| if spec.weights[i] > spec.weights[b] { i } else { b });
    let u = &spec.weights;
    let th = &spec.thresholds;

    let per_split: Vec<(Option<Candidate>, u64)> = splits
        .par_iter()
        .map(|&split| {
            let q: Vec<f64> = split.iter().map(|&s| s as f64 * power / n as f64).collect();
            // a zero-power precoder has no meaningful angle
            let range = |i: usize| if split[i] == 0 { 1 } else { angles.len() };
            let mut best: Option<Candidate> = None;
            let mut count = 0u64;
            for ac in 0..range(0) {
                for a1 in 0..range(1) {
                    for a2 in 0..range(2) {
                        count += 1;
                        let mut rc = f64::INFINITY;
                        let mut rp = [0.0; 2];
                        let mut rw = [0.0; 2]; // rw[k]: rate of stream k at the other user
                        for k in 0..2 {
                            let sc = q[0] * gain[k][ac];
                            let s1 = q[1] * gain[k][a1];
                            let s2 = q[2] * gain[k][a2];
                            let own = if k == 0 { s1 } else { s2 };
                            let other = if k == 0 { s2 } else { s1 };
                            rc = rc.min(log2_1p(sc / (s1 + s2 + noise)));
                            rp[k] = log2_1p(own / (other + noise));
                            // user k overhears the other stream after removing its own
                            rw[1 - k] = log2_1p(other / noise);
                        }
                        if (0..2).any(|k| th[k] > 0.0 && rp[k] - rw[k] < th[k]) {
                            continue;
                        }
                        let wsr = u[best_user] * rc + u[0] * rp[0] + u[1] * rp[1];
                        if best.map_or(true, |b| wsr > b.wsr) {
                            best = Some(Candidate {
                                wsr,
                                idx: [(split[0], ac), (split[1], a1), (split[2], a2)],
                            });
                        }
                    }
                }
            }
            (best, count)
        })
        .collect();

    // ties resolved by enumeration order, independent of thread scheduling
    let mut best: Option<Candidate> = None;
    let mut candidates = 0;
    for (cand, count) in per_split {
        candidates += count;
        if let Some(c) = cand {
            if best.map_or(true, |b| c.wsr > b.wsr) {
                best = Some(c);
            }
        }
    }
    let vector = |(s, a): (usize, usize)| -> Vec<Complex<f64>> {
        let amp = (s as f64 * power / n as f64).sqrt();
        vec![Complex::new(amp * angles[a].cos(), 0.0), Complex::new(amp * angles[a].sin(), 0.0)]
    };
    Ok(match best {
        Some(b) => {
            let precoders = Precoders {
                common: vector(b.idx[0]),
                private: vec![vector(b.idx[1]), vector(b.idx[2])],
            };
            let rates = crate::model::compute_rates(channels, &precoders, noise)?;
            let common_rates = crate::model::best_common_split(&rates, &spec.weights);
            OracleResult {
                wsr: b.wsr,
                precoders,
                common_rates,
                candidates,
            }
        }
        None => OracleResult {
            wsr: f64::NEG_INFINITY,
            precoders: Precoders::zeros(2, 2),
            common_rates: vec![0.0; 2],
            candidates,
        },
    })
}

/// Worst sampled violations of the first-order surrogates.
///
/// Violations are `surrogate − exact` divided by `max(1, |exact|)`; positive values mean the
/// surrogate over-estimates the function it is supposed to bound from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub samples: usize,
    /// Tangent of `2^α`.
    pub exp2_violation: f64,
    /// Lower bound of `|hᴴp|² / β`.
    pub sinr_violation: f64,
    /// Linearized eavesdropper weighted MSE versus its exact value.
    pub wiretap_wmse_violation: f64,
    /// Largest mismatch of the three surrogates at their expansion points.
    pub tangency_residual: f64,
    /// Printed bilinear wiretap form: largest over-estimate of `ρ (Σ|hᴴp|² + σ²)`.
    /// Diagnostic only; the form is not a global lower bound when interferers exist.
    pub wiretap_bilinear_overshoot: f64,
    pub wiretap_bilinear_overshoot_count: usize,
}

fn cgauss(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex<f64>> {
    (0..n)
        .map(|_| Complex::new(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale))
        .collect()
}

fn rel(surrogate: f64, exact: f64) -> f64 {
    (surrogate - exact) / exact.abs().max(1.0)
}

fn random_precoders(rng: &mut ChaCha8Rng, k: usize, n: usize, scale: f64) -> Precoders<f64> {
    Precoders {
        common: cgauss(rng, n, scale),
        private: (0..k).map(|_| cgauss(rng, n, scale)).collect(),
    }
}

/// Samples expansion and evaluation points and records the worst violations.
pub fn check_taylor_bounds(n_samples: usize, seed: u64) -> TaylorReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = TaylorReport {
        samples: n_samples,
        exp2_violation: f64::NEG_INFINITY,
        sinr_violation: f64::NEG_INFINITY,
        wiretap_wmse_violation: f64::NEG_INFINITY,
        tangency_residual: 0.0,
        wiretap_bilinear_overshoot: f64::NEG_INFINITY,
        wiretap_bilinear_overshoot_count: 0,
    };
    for i in 0..n_samples {
        let a: f64 = rng.gen_range(-10.0..10.0);
        let a0: f64 = rng.gen_range(-10.0..10.0);
        r.exp2_violation = r.exp2_violation.max(rel(exp2_tangent(a, a0), 2f64.powf(a)));
        r.tangency_residual = r.tangency_residual.max(rel(exp2_tangent(a0, a0), 2f64.powf(a0)).abs());

        let n = 1 + i % 4;
        let h = cgauss(&mut rng, n, 2.0);
        let p = cgauss(&mut rng, n, 3.0);
        let p0 = cgauss(&mut rng, n, 3.0);
        let beta: f64 = rng.gen_range(0.1..10.0);
        let beta0: f64 = rng.gen_range(0.1..10.0);
        let exact = crate::scalar::inner(&h, &p).norm_sqr() / beta;
        r.sinr_violation = r.sinr_violation.max(rel(sinr_lower_bound(&h, &p, &p0, beta, beta0), exact));
        let exact0 = crate::scalar::inner(&h, &p0).norm_sqr() / beta0;
        r.tangency_residual = r
            .tangency_residual
            .max(rel(sinr_lower_bound(&h, &p0, &p0, beta0, beta0), exact0).abs());

        // averaged eavesdropper weighted MSE over a few samples around one channel
        let k = 2 + i % 2;
        let samples: Vec<ChannelSet<f64>> = (0..2)
            .map(|_| ChannelSet::new((0..k).map(|_| cgauss(&mut rng, n, 1.0)).collect()).expect("valid sample"))
            .collect();
        let e0 = random_precoders(&mut rng, k, n, 2.0);
        let e = random_precoders(&mut rng, k, n, 2.0);
        let avg = compute_averages(&update_equalizers_and_weights(&e0, &samples, 1.0), &samples);
        for s in avg.streams.iter().filter(|s| matches!(s.id, StreamId::Wiretap { .. })) {
            r.wiretap_wmse_violation = r
                .wiretap_wmse_violation
                .max(rel(s.wmse_linearized(&e, &e0, 1.0), s.wmse_at(&e, 1.0)));
            r.tangency_residual = r
                .tangency_residual
                .max(rel(s.wmse_linearized(&e0, &e0, 1.0), s.wmse_at(&e0, 1.0)).abs());
        }

        // printed bilinear form with one interfering stream
        let q = cgauss(&mut rng, n, 2.0);
        let q0 = cgauss(&mut rng, n, 2.0);
        let rho: f64 = rng.gen_range(0.0..10.0);
        let rho0: f64 = rng.gen_range(0.0..10.0);
        let over = rel(
            wiretap_bilinear_printed(&h, &[&q], &[&q0], rho, rho0, 1.0),
            wiretap_bilinear_exact(&h, &[&q], rho, 1.0),
        );
        r.wiretap_bilinear_overshoot = r.wiretap_bilinear_overshoot.max(over);
        if over > 1e-12 {
            r.wiretap_bilinear_overshoot_count += 1;
        }
    }
    r
}

/// Worst residual of `ξ^MMSE = 1 − R` and counts of probes beating the closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateWmmseReport {
    pub instances: usize,
    pub common_residual: f64,
    pub private_residual: f64,
    pub wiretap_residual: f64,
    /// Perturbed equalizers with a lower MSE than the MMSE equalizer.
    pub equalizer_violations: usize,
    pub equalizer_probes: usize,
    /// Grid weights with a lower weighted MSE than the MMSE weight.
    pub weight_violations: usize,
    pub weight_probes: usize,
}

impl RateWmmseReport {
    pub fn max_residual(&self) -> f64 {
        self.common_residual.max(self.private_residual).max(self.wiretap_residual)
    }
}

/// Random (channel, precoder) instances with 100 perturbed equalizers and a 100-point
/// log-spaced weight grid per stream.
pub fn check_rate_wmmse(n_samples: usize, seed: u64) -> RateWmmseReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = RateWmmseReport {
        instances: n_samples,
        common_residual: 0.0,
        private_residual: 0.0,
        wiretap_residual: 0.0,
        equalizer_violations: 0,
        equalizer_probes: 0,
        weight_violations: 0,
        weight_probes: 0,
    };
    for i in 0..n_samples {
        let k = 2 + i % 2;
        let n = 1 + i % 4;
        let channels = random_channels::<f64>(k, n, rng.gen()).expect("valid sizes");
        // precoder power spread over several decades
        let scale = 10f64.powf(rng.gen_range(-1.0..1.5));
        let precoders = random_precoders(&mut rng, k, n, scale);
        let sample = SampleMmse::compute(&channels, &precoders, 1.0);
        for (id, s) in &sample.streams {
            let gap = s.rate_wmmse_gap();
            let slot = match id {
                StreamId::Common(_) => &mut r.common_residual,
                StreamId::Private(_) => &mut r.private_residual,
                StreamId::Wiretap { .. } => &mut r.wiretap_residual,
            };
            *slot = slot.max(gap);

            let eps = s.mse;
            let tol = 1e-12 * (1.0 + eps);
            for _ in 0..100 {
                let mag = s.equalizer.norm().max(1e-3) * rng.gen_range(1e-4..1.0);
                let dg = Complex::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU));
                r.equalizer_probes += 1;
                if mse(s.equalizer + dg, s.signal, s.total) < eps - tol {
                    r.equalizer_violations += 1;
                }
            }
            let xi = wmse(s.weight, eps);
            for g in 0..100 {
                let w = s.weight * 10f64.powf(-3.0 + 6.0 * g as f64 / 99.0);
                r.weight_probes += 1;
                if wmse(w, eps) < xi - 1e-12 * (1.0 + xi.abs()) {
                    r.weight_violations += 1;
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_power_gives_vanishing_rate() {
        let ch = ChannelSet::from_real(&[vec![1.0, 0.3], vec![-0.2, 0.8]]).unwrap();
        let spec = SecrecySpec::uniform(0.0, vec![1.0, 1.0]).unwrap();
        let res = grid_oracle_wsr(&ch, &spec, 1e-9, 1.0, GridSpec::default()).unwrap();
        assert!(res.wsr < 1e-8);
    }

    #[test]
    fn single_weighted_user_reaches_mrt_rate() {
        let ch = ChannelSet::from_real(&[vec![1.0, 0.5], vec![0.3, -0.9]]).unwrap();
        let spec = SecrecySpec::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let res = grid_oracle_wsr(&ch, &spec, 10.0, 1.0, GridSpec::default()).unwrap();
        let mrt = (1.0 + 10.0 * 1.25f64).log2();
        assert!(res.wsr <= mrt + 1e-12);
        assert!(mrt - res.wsr < 0.01, "oracle {} vs MRT {mrt}", res.wsr);
    }

    #[test]
    fn rejects_complex_and_wrong_sizes() {
        let spec = SecrecySpec::uniform(0.0, vec![1.0, 1.0]).unwrap();
        let ch = crate::model::specific_channels(1.0, 0.5, 2).unwrap();
        assert!(grid_oracle_wsr(&ch, &spec, 1.0, 1.0, GridSpec::default()).is_err());
        let ch = random_channels::<f64>(2, 3, 1).unwrap();
        assert!(grid_oracle_wsr(&ch, &spec, 1.0, 1.0, GridSpec::default()).is_err());
    }

    #[test]
    fn finer_grid_never_worse_and_deterministic() {
        let ch = ChannelSet::from_real(&[vec![1.0, 0.2], vec![0.4, 0.7]]).unwrap();
        let spec = SecrecySpec::uniform(0.2, vec![1.0, 1.0]).unwrap();
        let coarse = GridSpec { power_steps: 5, angle_steps: 8 };
        let fine = GridSpec { power_steps: 10, angle_steps: 16 };
        let a = grid_oracle_wsr(&ch, &spec, 10.0, 1.0, coarse).unwrap();
        let b = grid_oracle_wsr(&ch, &spec, 10.0, 1.0, fine).unwrap();
        assert!(b.wsr >= a.wsr);
        assert_eq!(a, grid_oracle_wsr(&ch, &spec, 10.0, 1.0, coarse).unwrap());
    }

    #[test]
    fn small_surrogate_sweep() {
        let r = check_taylor_bounds(500, 3);
        assert!(r.exp2_violation <= 1e-12);
        assert!(r.sinr_violation <= 1e-12);
        assert!(r.wiretap_wmse_violation <= 1e-12);
        assert!(r.tangency_residual <= 1e-10);
        let w = check_rate_wmmse(20, 4);
        assert!(w.max_residual() <= 1e-9);
        assert_eq!(w.equalizer_violations + w.weight_violations, 0);
    }
}
