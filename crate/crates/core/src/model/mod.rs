//! Channel, precoder and rate types for the one-layer rate-splitting broadcast channel.
//!
//! Every user decodes the common stream treating all private streams as noise,
//! removes it, decodes its own private stream, removes that too, and then acts as
//! an eavesdropper on the remaining private streams.

mod channels;

pub use channels::{derive_seed, random_channels, random_real_channels, sample_csit, specific_channels, CsitModel};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{inner, log2_1p, norm_sqr, Real};

/// Channel vectors `h_k` of all users, one row per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet<T> {
    n_tx: usize,
    users: Vec<Vec<Complex<T>>>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(users: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let n_tx = users
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidParameter("channel set needs at least one user".into()))?;
        if n_tx == 0 {
            return Err(Error::InvalidParameter("antenna count must be positive".into()));
        }
        for (k, h) in users.iter().enumerate() {
            if h.len() != n_tx {
                return Err(Error::Dimension(format!(
                    "user {k} has {} antennas, expected {n_tx}",
                    h.len()
                )));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("user {k} channel is not finite")));
            }
        }
        Ok(Self { n_tx, users })
    }

    /// Builds a channel set from real-valued rows.
    pub fn from_real(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex::new(x, T::zero())).collect())
                .collect(),
        )
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn user(&self, k: usize) -> &[Complex<T>] {
        &self.users[k]
    }

    pub fn users(&self) -> &[Vec<Complex<T>>] {
        &self.users
    }

    pub fn is_real(&self) -> bool {
        self.users.iter().flatten().all(|z| z.im == T::zero())
    }

    pub fn cast<U: Real>(&self) -> ChannelSet<U> {
        ChannelSet {
            n_tx: self.n_tx,
            users: self.users.iter().map(|h| cast_vec(h)).collect(),
        }
    }
}

fn cast_vec<T: Real, U: Real>(v: &[Complex<T>]) -> Vec<Complex<U>> {
    v.iter()
        .map(|z| Complex::new(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy())))
        .collect()
}

/// Common precoder `p_c` and private precoders `p_1..p_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precoders<T> {
    pub common: Vec<Complex<T>>,
    pub private: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Precoders<T> {
    pub fn zeros(n_users: usize, n_tx: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            common: vec![zero; n_tx],
            private: vec![vec![zero; n_tx]; n_users],
        }
    }

    pub fn n_users(&self) -> usize {
        self.private.len()
    }

    pub fn n_tx(&self) -> usize {
        self.common.len()
    }

    /// `tr(P Pᴴ)`.
    pub fn total_power(&self) -> T {
        self.common_power() + self.private.iter().map(|p| norm_sqr(p)).sum()
    }

    pub fn common_power(&self) -> T {
        norm_sqr(&self.common)
    }

    pub fn private_power(&self, k: usize) -> T {
        norm_sqr(&self.private[k])
    }

    pub fn scaled(&self, t: T) -> Self {
        Self {
            common: self.common.iter().map(|z| z * t).collect(),
            private: self
                .private
                .iter()
                .map(|p| p.iter().map(|z| z * t).collect())
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Precoders<U> {
        Precoders {
            common: cast_vec(&self.common),
            private: self.private.iter().map(|p| cast_vec(p)).collect(),
        }
    }

    pub fn check_against(&self, channels: &ChannelSet<T>) -> Result<()> {
        if self.n_users() != channels.n_users() {
            return Err(Error::Dimension(format!(
                "{} private precoders for {} users",
                self.n_users(),
                channels.n_users()
            )));
        }
        let n = channels.n_tx();
        if self.common.len() != n || self.private.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension(format!("precoder length differs from {n} antennas")));
        }
        Ok(())
    }
}

/// Per-user secrecy thresholds (bits/channel-use) and objective weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecySpec<T> {
    pub thresholds: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> SecrecySpec<T> {
    pub fn new(thresholds: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if thresholds.len() != weights.len() {
            return Err(Error::Dimension("thresholds and weights differ in length".into()));
        }
        if thresholds.iter().any(|&r| !(r >= T::zero()) || !r.is_finite()) {
            return Err(Error::InvalidParameter("secrecy thresholds must be finite and >= 0".into()));
        }
        if weights.iter().any(|&u| !(u >= T::zero()) || !u.is_finite()) {
            return Err(Error::InvalidParameter("user weights must be finite and >= 0".into()));
        }
        if !weights.iter().any(|&u| u > T::zero()) {
            return Err(Error::InvalidParameter("at least one user weight must be positive".into()));
        }
        Ok(Self { thresholds, weights })
    }

    /// Same threshold for every user.
    pub fn uniform(threshold: T, weights: Vec<T>) -> Result<Self> {
        Self::new(vec![threshold; weights.len()], weights)
    }

    pub fn n_users(&self) -> usize {
        self.weights.len()
    }

    pub fn any_active(&self) -> bool {
        self.thresholds.iter().any(|&r| r > T::zero())
    }
}

/// SINRs and rates of every stream at every user.
///
/// Wiretap quantities are indexed `[owner][eavesdropper]`: `wiretap_rate[k][j]` is the
/// rate at which user `j` decodes user `k`'s private stream. Diagonal entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown<T> {
    pub noise: T,
    pub sinr_common: Vec<T>,
    pub sinr_private: Vec<T>,
    pub sinr_wiretap: Vec<Vec<T>>,
    pub rate_common: Vec<T>,
    pub rate_private: Vec<T>,
    pub rate_wiretap: Vec<Vec<T>>,
    pub secrecy: Vec<T>,
}

impl<T: Real> RateBreakdown<T> {
    pub fn n_users(&self) -> usize {
        self.rate_private.len()
    }

    /// Largest wiretap rate against user `k`'s private stream.
    pub fn max_wiretap(&self, k: usize) -> T {
        self.rate_wiretap[k]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &r)| r)
            .fold(T::zero(), T::max)
    }

    /// `min_k R_c,k`: the largest decodable common rate.
    pub fn min_common_rate(&self) -> T {
        self.rate_common.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Received power `|h_kᴴ p|²` of every stream at user `k`.
struct StreamPowers<T> {
    common: T,
    private: Vec<T>,
}

fn stream_powers<T: Real>(h: &[Complex<T>], precoders: &Precoders<T>) -> StreamPowers<T> {
    StreamPowers {
        common: inner(h, &precoders.common).norm_sqr(),
        private: precoders.private.iter().map(|p| inner(h, p).norm_sqr()).collect(),
    }
}

/// Evaluates the common, private and wiretap SINRs and the resulting rates.
pub fn compute_rates<T: Real>(
    channels: &ChannelSet<T>,
    precoders: &Precoders<T>,
    noise: T,
) -> Result<RateBreakdown<T>> {
    precoders.check_against(channels)?;
    if !(noise > T::zero()) || !noise.is_finite() {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let n_users = channels.n_users();
    let mut out = RateBreakdown {
        noise,
        sinr_common: Vec::with_capacity(n_users),
        sinr_private: Vec::with_capacity(n_users),
        sinr_wiretap: vec![vec![T::zero(); n_users]; n_users],
        rate_common: Vec::with_capacity(n_users),
        rate_private: Vec::with_capacity(n_users),
        rate_wiretap: vec![vec![T::zero(); n_users]; n_users],
        secrecy: Vec::with_capacity(n_users),
    };
    for k in 0..n_users {
        let pw = stream_powers(channels.user(k), precoders);
        let sum_except = |skip: &[usize]| -> T {
            pw.private
                .iter()
                .enumerate()
                .filter(|(i, _)| !skip.contains(i))
                .map(|(_, &x)| x)
                .sum()
        };
        let sinr_c = pw.common / (sum_except(&[]) + noise);
        let sinr_p = pw.private[k] / (sum_except(&[k]) + noise);
        out.sinr_common.push(sinr_c);
        out.sinr_private.push(sinr_p);
        out.rate_common.push(log2_1p(sinr_c));
        out.rate_private.push(log2_1p(sinr_p));
        // user k eavesdrops every other private stream j after removing its own
        for j in (0..n_users).filter(|&j| j != k) {
            let sinr = pw.private[j] / (sum_except(&[k, j]) + noise);
            out.sinr_wiretap[j][k] = sinr;
            out.rate_wiretap[j][k] = log2_1p(sinr);
        }
    }
    for k in 0..n_users {
        let s = (out.rate_private[k] - out.max_wiretap(k)).max(T::zero());
        out.secrecy.push(s);
    }
    Ok(out)
}

/// Weighted sum-rate `Σ u_k (C_k + R_p,k)`.
pub fn wsr<T: Real>(breakdown: &RateBreakdown<T>, common_rates: &[T], weights: &[T]) -> Result<T> {
    let k = breakdown.n_users();
    if common_rates.len() != k || weights.len() != k {
        return Err(Error::Dimension(format!(
            "expected {k} common rates and weights, got {} and {}",
            common_rates.len(),
            weights.len()
        )));
    }
    if common_rates.iter().any(|&c| c < T::zero()) {
        return Err(Error::InvalidParameter("common-rate allocation must be nonnegative".into()));
    }
    Ok((0..k)
        .map(|i| weights[i] * (common_rates[i] + breakdown.rate_private[i]))
        .sum())
}

/// Common-rate split maximizing `Σ u_k C_k` subject to `Σ C_k <= min_k R_c,k`:
/// the whole common rate goes to the first user with the largest weight.
pub fn best_common_split<T: Real>(breakdown: &RateBreakdown<T>, weights: &[T]) -> Vec<T> {
    let mut split = vec![T::zero(); weights.len()];
    let best = weights
        .iter()
        .enumerate()
        .fold(0, |b, (i, &u)| if u > weights[b] { i } else { b });
    if !split.is_empty() {
        split[best] = breakdown.min_common_rate().max(T::zero());
    }
    split
}
