use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ChannelSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Derives an independent seed for stream `index` of a master seed.
///
/// `trial_seed = splitmix64(master ^ splitmix64(index + 1))`, stable across platforms
/// and worker counts.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

/// Two-user line-of-sight style channels `h_1 = [1, …, 1]`, `h_2 = γ [1, e^{jθ}, …, e^{j(N−1)θ}]`.
///
/// For `n_tx = 2` this is the usual specific-channel pair; larger arrays extend the
/// second user with a uniform linear phase ramp.
pub fn specific_channels<T: Real>(gamma: T, theta: T, n_tx: usize) -> Result<ChannelSet<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidParameter("relative channel strength must be positive".into()));
    }
    if n_tx == 0 {
        return Err(Error::InvalidParameter("antenna count must be positive".into()));
    }
    let one = Complex::new(T::one(), T::zero());
    let h1 = vec![one; n_tx];
    let h2 = (0..n_tx)
        .map(|m| Complex::from_polar(gamma, theta * T::lit(m as f64)))
        .collect();
    ChannelSet::new(vec![h1, h2])
}

fn complex_gaussian<T: Real>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(T::lit(re * scale), T::lit(im * scale))
}

fn gaussian_set<T: Real>(n_users: usize, n_tx: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex<T>>> {
    (0..n_users)
        .map(|_| (0..n_tx).map(|_| complex_gaussian(rng)).collect())
        .collect()
}

/// I.i.d. `CN(0, 1)` channel entries, deterministic in `seed`.
pub fn random_channels<T: Real>(n_users: usize, n_tx: usize, seed: u64) -> Result<ChannelSet<T>> {
    if n_users == 0 || n_tx == 0 {
        return Err(Error::InvalidParameter("user and antenna counts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelSet::new(gaussian_set(n_users, n_tx, &mut rng))
}

/// I.i.d. real `N(0, 1)` channel entries, deterministic in `seed`.
pub fn random_real_channels<T: Real>(n_users: usize, n_tx: usize, seed: u64) -> Result<ChannelSet<T>> {
    if n_users == 0 || n_tx == 0 {
        return Err(Error::InvalidParameter("user and antenna counts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<T>> = (0..n_users)
        .map(|_| {
            (0..n_tx)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    T::lit(x)
                })
                .collect()
        })
        .collect();
    ChannelSet::from_real(&rows)
}

/// Channel estimate plus the CSIT error statistics around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsitModel<T> {
    pub estimate: ChannelSet<T>,
    /// Per-user error variance `σ_e²`.
    pub error_variance: Vec<T>,
}

impl<T: Real> CsitModel<T> {
    pub fn new(estimate: ChannelSet<T>, error_variance: Vec<T>) -> Result<Self> {
        if error_variance.len() != estimate.n_users() {
            return Err(Error::Dimension("one error variance per user required".into()));
        }
        if error_variance.iter().any(|&s| !(s >= T::zero()) || !s.is_finite()) {
            return Err(Error::InvalidParameter("error variance must be finite and >= 0".into()));
        }
        Ok(Self { estimate, error_variance })
    }

    /// Error variance `σ_e² = γ_e · P_t^(−δ)`, shared by all users.
    pub fn error_variance_for(quality: T, delta: T, power: T) -> T {
        quality * power.powf(-delta)
    }

    pub fn from_quality(estimate: ChannelSet<T>, quality: T, delta: T, power: T) -> Result<Self> {
        if !(quality >= T::zero()) || !(delta >= T::zero()) || !(power > T::zero()) {
            return Err(Error::InvalidParameter(
                "quality and scaling factor must be >= 0 and power > 0".into(),
            ));
        }
        let var = Self::error_variance_for(quality, delta, power);
        let k = estimate.n_users();
        Self::new(estimate, vec![var; k])
    }

    pub fn perfect(estimate: ChannelSet<T>) -> Self {
        let k = estimate.n_users();
        Self {
            estimate,
            error_variance: vec![T::zero(); k],
        }
    }
}

/// Draws `M` conditional channel realizations `H^(m) = √(1−σ_e²) Ĥ + √σ_e² H̃^(m)`.
pub fn sample_csit<T: Real>(model: &CsitModel<T>, n_samples: usize, seed: u64) -> Result<Vec<ChannelSet<T>>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    if model
        .error_variance
        .iter()
        .any(|&s| !(s >= T::zero()) || s > T::one())
    {
        return Err(Error::InvalidParameter("error variance must lie in [0, 1]".into()));
    }
    let est = &model.estimate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let noise = gaussian_set::<T>(est.n_users(), est.n_tx(), &mut rng);
            let users = est
                .users()
                .iter()
                .zip(noise)
                .zip(&model.error_variance)
                .map(|((h, e), &var)| {
                    let keep = (T::one() - var).sqrt();
                    let spread = var.sqrt();
                    h.iter().zip(e).map(|(a, b)| a * keep + b * spread).collect()
                })
                .collect();
            ChannelSet::new(users)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn specific_channel_shapes() {
        let ch = specific_channels(1.0, 0.0, 2).unwrap();
        assert_eq!(ch.user(0), ch.user(1));

        let ch = specific_channels(0.3, 2.0 * PI / 9.0, 2).unwrap();
        let h2 = ch.user(1);
        assert!((h2[0] - Complex::new(0.3, 0.0)).norm() < 1e-15);
        assert!((h2[1] - Complex::from_polar(0.3, 2.0 * PI / 9.0)).norm() < 1e-15);

        let ch = specific_channels(1.0, PI, 2).unwrap();
        let ip = crate::scalar::inner(ch.user(0), ch.user(1));
        assert!(ip.norm() < 1e-15);

        let ch4 = specific_channels(0.3, PI / 9.0, 4).unwrap();
        assert_eq!(ch4.n_tx(), 4);
        assert!((ch4.user(1)[3] - Complex::from_polar(0.3, 3.0 * PI / 9.0)).norm() < 1e-15);

        assert!(specific_channels(0.0, 0.0, 2).is_err());
        assert!(specific_channels(-1.0, 0.0, 2).is_err());
    }

    #[test]
    fn random_channels_are_deterministic() {
        let a = random_channels::<f64>(3, 4, 99).unwrap();
        let b = random_channels::<f64>(3, 4, 99).unwrap();
        let c = random_channels::<f64>(3, 4, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn complex_gaussian_moments() {
        let n = 100_000;
        let ch = random_channels::<f64>(n, 1, 2024).unwrap();
        let (mut mean, mut power) = (Complex::new(0.0, 0.0), 0.0);
        for h in ch.users() {
            mean += h[0];
            power += h[0].norm_sqr();
        }
        mean /= n as f64;
        let var = power / n as f64 - mean.norm_sqr();
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn csit_sampling_limits() {
        let est = random_channels::<f64>(2, 2, 5).unwrap();
        let exact = CsitModel::new(est.clone(), vec![0.0, 0.0]).unwrap();
        for h in sample_csit(&exact, 4, 1).unwrap() {
            assert_eq!(h, est);
        }

        let discard = CsitModel::new(est.clone(), vec![1.0, 1.0]).unwrap();
        let zero_est = CsitModel::new(
            ChannelSet::new(vec![vec![Complex::new(0.0, 0.0); 2]; 2]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(
            sample_csit(&discard, 3, 8).unwrap(),
            sample_csit(&zero_est, 3, 8).unwrap()
        );

        let var = CsitModel::<f64>::error_variance_for(1.0, 0.6, 100.0);
        assert!((var - 100f64.powf(-0.6)).abs() < 1e-15);
        assert!((var - 0.0631).abs() < 1e-4);

        let bad = CsitModel {
            estimate: est,
            error_variance: vec![1.5, 0.0],
        };
        assert!(sample_csit(&bad, 1, 0).is_err());
        assert!(sample_csit(&exact, 0, 0).is_err());
    }

    #[test]
    fn seed_derivation_is_stable() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }
}
