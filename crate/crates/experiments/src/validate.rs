//! The `validate` subcommand: identity, surrogate and grid-oracle checks with a text report.

use std::fmt::Write;

use secrsma::model::{derive_seed, random_real_channels, SecrecySpec};
use secrsma::mulp::solve_mulp_wsr;
use secrsma::oracle::{check_rate_wmmse, check_taylor_bounds, grid_oracle_wsr, GridSpec};
use secrsma::sca::{solve_wsr, ScaOptions, WarmStart};

pub struct ValidationOptions {
    pub seed: u64,
    pub identity_instances: usize,
    pub surrogate_samples: usize,
    /// Real 2×2 instances compared against the grid oracle; zero skips the comparison.
    pub oracle_instances: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            identity_instances: 200,
            surrogate_samples: 10_000,
            oracle_instances: 5,
        }
    }
}

pub struct ValidationReport {
    pub text: String,
    pub passed: bool,
}

fn line(text: &mut String, passed: &mut bool, ok: bool, msg: String) {
    *passed &= ok;
    let _ = writeln!(text, "[{}] {msg}", if ok { "PASS" } else { "FAIL" });
}

pub fn run_validation(opts: &ValidationOptions) -> ValidationReport {
    let mut text = String::new();
    let mut passed = true;

    let w = check_rate_wmmse(opts.identity_instances, opts.seed);
    line(
        &mut text,
        &mut passed,
        w.max_residual() <= 1e-9,
        format!(
            "rate-WMSE identity over {} instances: common {:.2e}, private {:.2e}, wiretap {:.2e}",
            w.instances, w.common_residual, w.private_residual, w.wiretap_residual
        ),
    );
    line(
        &mut text,
        &mut passed,
        w.equalizer_violations == 0 && w.weight_violations == 0,
        format!(
            "MMSE closed forms: {}/{} equalizer and {}/{} weight probes beat them",
            w.equalizer_violations, w.equalizer_probes, w.weight_violations, w.weight_probes
        ),
    );

    let t = check_taylor_bounds(opts.surrogate_samples, opts.seed);
    line(
        &mut text,
        &mut passed,
        t.exp2_violation <= 1e-12 && t.sinr_violation <= 1e-12 && t.wiretap_wmse_violation <= 1e-12 && t.tangency_residual <= 1e-10,
        format!(
            "surrogates over {} samples: exp2 {:.2e}, sinr {:.2e}, wiretap wmse {:.2e}, tangency {:.2e}",
            t.samples, t.exp2_violation, t.sinr_violation, t.wiretap_wmse_violation, t.tangency_residual
        ),
    );
    let _ = writeln!(
        text,
        "[INFO] printed bilinear wiretap form: {} of {} samples over-estimate (worst {:.3e})",
        t.wiretap_bilinear_overshoot_count, t.samples, t.wiretap_bilinear_overshoot
    );

    for i in 0..opts.oracle_instances {
        let seed = derive_seed(opts.seed, i as u64);
        let power = 100.0;
        let result = random_real_channels::<f64>(2, 2, seed).and_then(|ch| {
            let spec = SecrecySpec::uniform(0.2, vec![1.0, 1.0])?;
            let oracle = grid_oracle_wsr(&ch, &spec, power, 1.0, GridSpec::default())?;
            let mulp = solve_mulp_wsr(&ch, &spec, power, &ScaOptions::default())?;
            let opts = ScaOptions {
                warm_starts: vec![WarmStart::from(&mulp)],
                ..ScaOptions::default()
            };
            let rs = solve_wsr(&ch, &spec, power, &opts)?;
            Ok((oracle.wsr, rs.wsr))
        });
        match result {
            Ok((o, s)) => line(&mut text, &mut passed, s >= o - 1e-3, format!("grid oracle instance {i}: SCA {s:.6} vs oracle {o:.6}")),
            Err(e) => line(&mut text, &mut passed, false, format!("grid oracle instance {i}: {e}")),
        }
    }
    ValidationReport { text, passed }
}
