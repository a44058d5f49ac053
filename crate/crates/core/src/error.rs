use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("all user channels are zero")]
    ZeroChannel,
    #[error("secrecy thresholds are infeasible (minimal total slack {slack:.3e})")]
    InfeasibleThresholds { slack: f64 },
    #[error("conic subproblem infeasible")]
    Infeasible,
    #[error("conic solver numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
