use std::f64::consts::PI;

use secrsma::ao::{saf_rates, solve_wesr, AoOptions};
use secrsma::model::{compute_rates, sample_csit, specific_channels, CsitModel, SecrecySpec};
use secrsma::mulp::solve_mulp_wesr;
use secrsma::sca::{initial_precoders, WarmStart};

fn fig_csit(power: f64) -> CsitModel<f64> {
    let ch = specific_channels(1.0, 2.0 * PI / 9.0, 2).unwrap();
    let var = CsitModel::<f64>::error_variance_for(1.0, 0.6, power);
    CsitModel::new(ch, vec![var; 2]).unwrap()
}

#[test]
fn error_free_single_sample_matches_instantaneous_rates() {
    let ch = specific_channels(1.0, 2.0 * PI / 9.0, 2).unwrap();
    let csit = CsitModel::perfect(ch.clone());
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let opts = AoOptions {
        samples: 1,
        ..AoOptions::default()
    };
    let sol = solve_wesr(&csit, &spec, 100.0, &opts).unwrap();
    let inst = compute_rates(&ch, &sol.precoders, 1.0).unwrap();
    for k in 0..2 {
        assert!((inst.rate_private[k] - sol.rates.rate_private[k]).abs() <= 1e-12);
        assert!((inst.rate_common[k] - sol.rates.rate_common[k]).abs() <= 1e-12);
        assert!((inst.secrecy[k] - sol.rates.secrecy[k]).abs() <= 1e-12);
    }
}

#[test]
fn outer_objective_is_nonincreasing() {
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let opts = AoOptions {
        samples: 200,
        seed: 3,
        ..AoOptions::default()
    };
    let sol = solve_wesr(&fig_csit(100.0), &spec, 100.0, &opts).unwrap();
    assert!(sol.converged && sol.secrecy_ok);
    for w in sol.trace.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-7, "{} -> {}", w[0].objective, w[1].objective);
    }
}

#[test]
fn rs_beats_mulp_on_the_same_samples() {
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let csit = fig_csit(100.0);
    let opts = AoOptions {
        samples: 1000,
        seed: 5,
        ..AoOptions::default()
    };
    let mulp = solve_mulp_wesr(&csit, &spec, 100.0, &opts).unwrap();
    let rs = solve_wesr(
        &csit,
        &spec,
        100.0,
        &AoOptions {
            warm_starts: vec![WarmStart::from(&mulp)],
            ..opts
        },
    )
    .unwrap();
    assert!(rs.secrecy_ok && mulp.secrecy_ok);
    assert!(rs.wsr >= mulp.wsr, "{} < {}", rs.wsr, mulp.wsr);
}

#[test]
fn sample_averages_settle_with_more_samples() {
    let csit = fig_csit(100.0);
    let p = initial_precoders(&csit.estimate, 100.0, 0.5).unwrap();
    let small = saf_rates(&sample_csit(&csit, 10_000, 1).unwrap(), &p, 1.0).unwrap();
    let large = saf_rates(&sample_csit(&csit, 100_000, 2).unwrap(), &p, 1.0).unwrap();
    for k in 0..2 {
        let rel = (small.rate_private[k] - large.rate_private[k]).abs() / large.rate_private[k];
        assert!(rel <= 0.005, "user {k}: {rel}");
        let rel = (small.rate_common[k] - large.rate_common[k]).abs() / large.rate_common[k];
        assert!(rel <= 0.005, "user {k}: {rel}");
    }
}
