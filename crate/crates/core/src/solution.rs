//! Optimizer output shared by the perfect- and imperfect-CSIT solvers.

use serde::{Deserialize, Serialize};

use crate::model::{Precoders, RateBreakdown};

/// Transmission scheme the precoders were optimized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Scheme {
    /// One-layer rate splitting: a common stream plus one private stream per user.
    #[default]
    #[serde(rename = "RS")]
    RateSplitting,
    /// Multi-user linear precoding: private streams only.
    #[serde(rename = "MULP")]
    Mulp,
}

impl Scheme {
    pub fn has_common_stream(self) -> bool {
        matches!(self, Scheme::RateSplitting)
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::RateSplitting => "RS",
            Scheme::Mulp => "MULP",
        }
    }
}

/// One record per (outer) iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Subproblem objective: the surrogate WSR for the SCA, the WMMSE objective for the AO.
    pub objective: f64,
    /// Weighted sum-rate of the iterate with true (or sample-averaged) rates.
    pub wsr: f64,
    /// Common-rate allocation after the iteration.
    pub common_rates: Vec<f64>,
    /// Private rates (instantaneous or sample-averaged) after the iteration.
    pub private_rates: Vec<f64>,
}

/// Precoders, common-rate allocation and the true-rate evaluation of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSolution {
    pub scheme: Scheme,
    pub precoders: Precoders<f64>,
    pub common_rates: Vec<f64>,
    /// `Σ u_k (C_k + R_p,k)` with true (or sample-averaged) rates.
    pub wsr: f64,
    /// True rates at the returned precoders; sample averages for the imperfect-CSIT solver.
    pub rates: RateBreakdown<f64>,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Every user meets its secrecy threshold within the feasibility tolerance.
    pub secrecy_ok: bool,
    /// `max_k (R^th_k − R_s,k)`, clamped at zero.
    pub max_secrecy_violation: f64,
    /// Common-power initialization fraction of the winning run; `None` for a warm start.
    pub kappa: Option<f64>,
}

impl PrecoderSolution {
    pub fn common_power_fraction(&self, power: f64) -> f64 {
        self.precoders.common_power() / power
    }

    pub fn private_power_fractions(&self, power: f64) -> Vec<f64> {
        (0..self.precoders.n_users())
            .map(|k| self.precoders.private_power(k) / power)
            .collect()
    }
}

/// Largest shortfall of the secrecy rates below their thresholds.
pub fn secrecy_violation(rates: &RateBreakdown<f64>, thresholds: &[f64]) -> f64 {
    thresholds
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(k, &t)| t - (rates.rate_private[k] - rates.max_wiretap(k)))
        .fold(0.0, f64::max)
}
