//! Secure multi-user linear precoding: the rate-splitting solvers restricted to a zero
//! common precoder and zero common rates.
//!
//! Every MULP solution is feasible for the rate-splitting problem. Handing it to the RS
//! solver as a [`WarmStart`](crate::sca::WarmStart) makes the RS result at least as good,
//! whatever local optimum the default initialization would have reached.

use crate::ao::{solve_wesr, AoOptions};
use crate::error::Result;
use crate::model::{ChannelSet, CsitModel, SecrecySpec};
use crate::sca::{solve_wsr, ScaOptions};
use crate::solution::{PrecoderSolution, Scheme};

/// Perfect-CSIT MULP: the SCA with every common-stream variable and row removed.
pub fn solve_mulp_wsr(
    channels: &ChannelSet<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &ScaOptions,
) -> Result<PrecoderSolution> {
    let options = ScaOptions {
        scheme: Scheme::Mulp,
        ..options.clone()
    };
    solve_wsr(channels, spec, power, &options)
}

/// Imperfect-CSIT MULP: the alternating optimization without the common stream.
pub fn solve_mulp_wesr(
    csit: &CsitModel<f64>,
    spec: &SecrecySpec<f64>,
    power: f64,
    options: &AoOptions,
) -> Result<PrecoderSolution> {
    let options = AoOptions {
        scheme: Scheme::Mulp,
        ..options.clone()
    };
    solve_wesr(csit, spec, power, &options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_channels, specific_channels};
    use crate::sca::WarmStart;

    #[test]
    fn restriction_is_enforced() {
        let ch = random_channels::<f64>(2, 2, 17).unwrap();
        let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
        let sol = solve_mulp_wsr(&ch, &spec, 100.0, &ScaOptions::default()).unwrap();
        assert_eq!(sol.scheme, Scheme::Mulp);
        assert!(sol.precoders.common_power() == 0.0);
        assert!(sol.common_rates.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn orthogonal_users_split_power() {
        // h_1 ⊥ h_2 and no thresholds: two interference-free single-user links
        let ch = specific_channels(1.0, std::f64::consts::PI, 2).unwrap();
        let spec = SecrecySpec::uniform(0.0, vec![1.0, 1.0]).unwrap();
        let mulp = solve_mulp_wsr(&ch, &spec, 10.0, &ScaOptions::default()).unwrap();
        let expected: f64 = (0..2)
            .map(|k| (1.0 + 2.0 * mulp.precoders.private_power(k)).log2())
            .sum();
        assert!((mulp.wsr - expected).abs() < 1e-6);
        // equal split is optimal for equal gains: 2 log2(1 + 10)
        assert!((mulp.wsr - 2.0 * 11f64.log2()).abs() < 1e-3);
        let options = ScaOptions {
            warm_starts: vec![WarmStart::from(&mulp)],
            ..Default::default()
        };
        let rs = solve_wsr(&ch, &spec, 10.0, &options).unwrap();
        assert!(rs.wsr >= mulp.wsr - 1e-6);
    }
}
