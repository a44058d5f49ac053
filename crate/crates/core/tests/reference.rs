//! First SCA subproblem on the specific two-user channel against values from an
//! independent modeling stack (tools/first_iteration_reference.py, two different solvers
//! agreeing to 1e-7).

use std::f64::consts::PI;

use secrsma::conic::DEFAULT_TOLERANCE;
use secrsma::model::{specific_channels, SecrecySpec};
use secrsma::sca::{build_subproblem, initialize};
use secrsma::solution::Scheme;

fn first_subproblem_optimum(theta: f64, feasibility: bool) -> f64 {
    let ch = specific_channels(1.0, theta, 2).unwrap();
    let spec = SecrecySpec::uniform(0.1, vec![1.0, 1.0]).unwrap();
    let state = initialize(&ch, &spec, 100.0, 0.5, Scheme::RateSplitting, 1.0).unwrap();
    let sub = build_subproblem(&state, &ch, &spec, 100.0, Scheme::RateSplitting, 1.0, feasibility).unwrap();
    let (_, objective) = sub.problem.solve(DEFAULT_TOLERANCE).unwrap().into_optimal().unwrap();
    objective
}

#[test]
fn wsr_subproblem_matches_reference() {
    // θ = 8π/9: the κ = 0.5 start already meets the thresholds
    let wsr = -first_subproblem_optimum(8.0 * PI / 9.0, false);
    assert!((wsr - 11.1696512).abs() <= 1e-6, "got {wsr}");
}

#[test]
fn slack_subproblem_matches_reference() {
    // θ = 2π/9: the start violates secrecy, so the first subproblem minimizes total slack
    let slack = first_subproblem_optimum(2.0 * PI / 9.0, true);
    assert!((slack - 5.9656274).abs() <= 1e-6, "got {slack}");
}
