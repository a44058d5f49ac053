//! Sweep configuration read from TOML.
//!
//! ```toml
//! [scenario]
//! kind = "specific"          # or "random"
//! users = 2
//! antennas = 2
//! gamma = 1.0                # specific only
//! thetas = [0.349, 0.698]    # radians, specific only
//! weights = [1.0, 1.0]
//! csit = ["perfect", "imperfect"]
//! error_quality = 1.0        # σ_e² = error_quality · P_t^(−error_exponent)
//! error_exponent = 0.6
//! samples = 1000             # conditional samples per imperfect-CSIT solve
//! trials = 100               # random only
//! seed = 0
//!
//! [algorithm]
//! schemes = ["RS", "MULP"]
//! kappa = 0.5
//! trace_kappas = [0.1, 0.5, 0.8]
//!
//! [sweep]
//! snr_db = [20.0]
//! thresholds = [0.0, 0.5, 1.0]
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use secrsma::solution::Scheme;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Specific,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum CsitMode {
    Perfect,
    Imperfect,
}

impl CsitMode {
    pub fn label(self) -> &'static str {
        match self {
            CsitMode::Perfect => "perfect",
            CsitMode::Imperfect => "imperfect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeName {
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "MULP")]
    Mulp,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Rs => Scheme::RateSplitting,
            SchemeName::Mulp => Scheme::Mulp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default = "two")]
    pub users: usize,
    #[serde(default = "two")]
    pub antennas: usize,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub thetas: Vec<f64>,
    /// Defaults to unit weights.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default = "perfect_only")]
    pub csit: Vec<CsitMode>,
    #[serde(default = "one")]
    pub error_quality: f64,
    #[serde(default = "default_exponent")]
    pub error_exponent: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    #[serde(default = "both_schemes")]
    pub schemes: Vec<SchemeName>,
    #[serde(default = "half")]
    pub kappa: f64,
    #[serde(default = "default_trace_kappas")]
    pub trace_kappas: Vec<f64>,
    /// Outer stopping tolerance of both algorithms.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Inner stopping tolerance of the alternating optimization.
    #[serde(default = "default_inner_tolerance")]
    pub inner_tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    #[serde(default = "default_solver_tolerance")]
    pub solver_tolerance: f64,
    #[serde(default = "default_feasibility_tolerance")]
    pub feasibility_tolerance: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        toml::from_str("").expect("all algorithm fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_table")]
    pub table: String,
    #[serde(default = "default_trace")]
    pub trace: String,
    #[serde(default = "default_manifest")]
    pub manifest: String,
    #[serde(default = "default_timings")]
    pub timings: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        toml::from_str("").expect("all output fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn two() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn perfect_only() -> Vec<CsitMode> {
    vec![CsitMode::Perfect]
}
fn default_exponent() -> f64 {
    0.6
}
fn default_samples() -> usize {
    1000
}
fn default_trials() -> usize {
    100
}
fn both_schemes() -> Vec<SchemeName> {
    vec![SchemeName::Rs, SchemeName::Mulp]
}
fn default_trace_kappas() -> Vec<f64> {
    vec![0.1, 0.5, 0.8]
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_inner_tolerance() -> f64 {
    1e-5
}
fn default_max_iterations() -> usize {
    200
}
fn default_max_inner() -> usize {
    50
}
fn default_solver_tolerance() -> f64 {
    1e-8
}
fn default_feasibility_tolerance() -> f64 {
    1e-3
}
fn default_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_table() -> String {
    "results.csv".into()
}
fn default_trace() -> String {
    "trace.jsonl".into()
}
fn default_manifest() -> String {
    "manifest.json".into()
}
fn default_timings() -> String {
    "timings.csv".into()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        if cfg.scenario.weights.is_empty() {
            cfg.scenario.weights = vec![1.0; cfg.scenario.users];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        let s = &self.scenario;
        if s.users == 0 || s.antennas == 0 {
            return bad("users and antennas must be positive");
        }
        if s.weights.len() != s.users {
            return bad("weights must have one entry per user");
        }
        if s.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("weights must be finite and nonnegative");
        }
        if s.csit.is_empty() {
            return bad("csit list is empty");
        }
        match s.kind {
            ScenarioKind::Specific => {
                if s.users != 2 {
                    return bad("the specific scenario has two users");
                }
                if s.thetas.is_empty() {
                    return bad("specific scenario needs at least one theta");
                }
                if !(s.gamma > 0.0) {
                    return bad("gamma must be positive");
                }
            }
            ScenarioKind::Random => {
                if s.trials == 0 {
                    return bad("trials must be at least 1");
                }
            }
        }
        if s.csit.contains(&CsitMode::Imperfect) {
            if s.samples == 0 {
                return bad("samples must be at least 1");
            }
            if !(s.error_quality >= 0.0) || !(s.error_exponent >= 0.0) {
                return bad("error statistics must be nonnegative");
            }
        }
        let a = &self.algorithm;
        if a.schemes.is_empty() {
            return bad("schemes list is empty");
        }
        if !(0.0..=1.0).contains(&a.kappa) || a.trace_kappas.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return bad("kappa must lie in [0, 1]");
        }
        for t in [a.tolerance, a.inner_tolerance, a.solver_tolerance, a.feasibility_tolerance] {
            if !(t > 0.0) {
                return bad("tolerances must be positive");
            }
        }
        if a.max_iterations == 0 || a.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        let w = &self.sweep;
        if w.snr_db.is_empty() || w.thresholds.is_empty() {
            return bad("snr and threshold grids must be non-empty");
        }
        if w.snr_db.iter().any(|x| !x.is_finite()) || w.thresholds.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return bad("grid values must be finite and thresholds nonnegative");
        }
        Ok(())
    }

    /// Applies the global CLI overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out_dir: Option<&Path>, tolerance: Option<f64>) -> Result<(), ConfigError> {
        if let Some(s) = seed {
            self.scenario.seed = s;
        }
        if let Some(d) = out_dir {
            self.output.dir = d.to_owned();
        }
        if let Some(t) = tolerance {
            self.algorithm.tolerance = t;
        }
        self.validate()
    }
}
