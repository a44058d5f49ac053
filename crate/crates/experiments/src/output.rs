//! Result table, timing sidecar, trace file and run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::runner::{ResultRow, TraceRecord};

/// Column order of the result table; `{k}` columns repeat for users `1..=K`.
pub fn table_header(users: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "scenario", "instance", "seed", "scheme", "csit", "snr_db", "threshold", "theta", "gamma", "wsr",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["common_rate", "private_rate", "secrecy_rate"] {
        h.extend((1..=users).map(|k| format!("{prefix}_{k}")));
    }
    h.push("common_power_fraction".into());
    h.extend((1..=users).map(|k| format!("private_power_fraction_{k}")));
    for s in ["iterations", "converged", "feasible", "status"] {
        h.push(s.into());
    }
    h
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn padded(xs: &[f64], users: usize) -> impl Iterator<Item = String> + '_ {
    (0..users).map(move |k| xs.get(k).map(|v| v.to_string()).unwrap_or_default())
}

fn record(row: &ResultRow, users: usize) -> Vec<String> {
    let mut r = vec![
        serde_plain(&row.scenario),
        row.instance.clone(),
        opt(row.seed),
        row.scheme.label().to_string(),
        row.csit.label().to_string(),
        row.snr_db.to_string(),
        row.threshold.to_string(),
        opt(row.theta),
        opt(row.gamma),
        opt(row.wsr),
    ];
    r.extend(padded(&row.common_rates, users));
    r.extend(padded(&row.private_rates, users));
    r.extend(padded(&row.secrecy_rates, users));
    r.push(opt(row.common_power_fraction));
    r.extend(padded(&row.private_power_fractions, users));
    r.push(row.iterations.to_string());
    r.push(row.converged.to_string());
    r.push(row.feasible.to_string());
    r.push(row.status.clone());
    r
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn write_table<W: Write>(out: W, rows: &[ResultRow], users: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table_header(users))?;
    for row in rows {
        w.write_record(record(row, users))?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock times, kept apart from the deterministic table.
pub fn write_timings<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "scheme", "csit", "snr_db", "threshold", "wall_ms"])?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.scheme.label().to_string(),
            r.csit.label().to_string(),
            r.snr_db.to_string(),
            r.threshold.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    /// SHA-256 of the effective configuration (after CLI overrides), serialized as JSON.
    pub config_hash: String,
    pub seed: u64,
    pub core_version: &'static str,
    pub experiments_version: &'static str,
    pub rows: usize,
    pub failures: usize,
    /// How imperfect-CSIT estimates are drawn for random scenarios.
    pub estimate_protocol: &'static str,
    pub config: &'a ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest<'a>(command: &'a str, cfg: &'a ExperimentConfig, rows: usize, failures: usize) -> Manifest<'a> {
    Manifest {
        command,
        config_hash: config_hash(cfg),
        seed: cfg.scenario.seed,
        core_version: secrsma::VERSION,
        experiments_version: env!("CARGO_PKG_VERSION"),
        rows,
        failures,
        estimate_protocol: "random scenarios: estimate ~ CN(0, 1 - error variance) per entry; specific scenarios: estimate = specific channel",
        config: cfg,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes table, timings and manifest into the configured output directory.
pub fn write_sweep(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_table(create(dir, &cfg.output.table)?, rows, cfg.scenario.users)?;
    write_timings(create(dir, &cfg.output.timings)?, rows)?;
    let failures = rows.iter().filter(|r| r.wsr.is_none()).count();
    let m = manifest("sweep", cfg, rows.len(), failures);
    serde_json::to_writer_pretty(create(dir, &cfg.output.manifest)?, &m)?;
    Ok(())
}

pub fn write_trace_run(cfg: &ExperimentConfig, records: &[TraceRecord], failures: usize) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_traces(create(dir, &cfg.output.trace)?, records)?;
    let m = manifest("trace", cfg, records.len(), failures);
    serde_json::to_writer_pretty(create(dir, &cfg.output.manifest)?, &m)?;
    Ok(())
}
