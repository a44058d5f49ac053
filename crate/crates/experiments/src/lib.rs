//! Declarative experiment sweeps over the secrecy-constrained precoding solvers.

pub mod config;
pub mod output;
pub mod runner;
pub mod validate;

pub use config::ExperimentConfig;
pub use runner::{run_sweep, run_traces, ResultRow, TraceRecord};
