//! Secrecy-constrained rate-splitting precoding for the multi-antenna broadcast channel.

pub mod ao;
pub mod conic;
pub mod error;
pub mod model;
pub mod mulp;
pub mod oracle;
pub mod sca;
pub mod scalar;
pub mod solution;
pub mod surrogate;
pub mod wmmse;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ChannelSet = model::ChannelSet<f64>;
pub type Precoders = model::Precoders<f64>;
pub type RateBreakdown = model::RateBreakdown<f64>;
pub type SecrecySpec = model::SecrecySpec<f64>;
pub type CsitModel = model::CsitModel<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
