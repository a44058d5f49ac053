use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use secrsma_experiments::output::{write_sweep, write_trace_run};
use secrsma_experiments::validate::{run_validation, ValidationOptions};
use secrsma_experiments::{run_sweep, run_traces, ExperimentConfig};

#[derive(Parser)]
#[command(name = "secrsma", version, about = "Secrecy-constrained rate-splitting precoding experiments")]
struct Cli {
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Outer stopping tolerance, overriding the config.
    #[arg(long, global = true)]
    tolerance_override: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write the result table.
    Sweep { config: PathBuf },
    /// Run the oracle and identity checks.
    Validate {
        /// Real 2×2 instances compared against the grid oracle.
        #[arg(long, default_value_t = 5)]
        oracle_instances: usize,
    },
    /// Record per-iteration convergence traces for every `trace_kappas` value.
    Trace { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_overrides(cli.seed, cli.out_dir.as_deref(), cli.tolerance_override)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep { config } => {
            let cfg = load(cli, config)?;
            let rows = run_sweep(&cfg);
            let failed = rows.iter().filter(|r| r.wsr.is_none()).count();
            for r in &rows {
                if let Err(e) = r.check(cfg.algorithm.feasibility_tolerance) {
                    eprintln!("row invariant violated ({} {} {}): {e}", r.instance, r.scheme.label(), r.threshold);
                }
            }
            write_sweep(&cfg, &rows)?;
            println!("{} rows ({failed} failed cells) written to {}", rows.len(), cfg.output.dir.display());
            Ok(true)
        }
        Command::Trace { config } => {
            let cfg = load(cli, config)?;
            let (records, failures) = run_traces(&cfg);
            for f in &failures {
                eprintln!("trace run failed: {f}");
            }
            write_trace_run(&cfg, &records, failures.len())?;
            println!("{} trace records written to {}", records.len(), cfg.output.dir.join(&cfg.output.trace).display());
            Ok(true)
        }
        Command::Validate { oracle_instances } => {
            let report = run_validation(&ValidationOptions {
                seed: cli.seed.unwrap_or(0),
                oracle_instances: *oracle_instances,
                ..ValidationOptions::default()
            });
            print!("{}", report.text);
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot size the thread pool") {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
