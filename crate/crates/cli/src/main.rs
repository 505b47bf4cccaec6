//! `mdep-clt`: batch runner for normal-approximation bounds and distance
//! estimates on m-dependent triangular arrays.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::ExampleId;
use config::{ExperimentConfig, DEFAULT_BINS};
use error::CliError;

/// Environment variable overriding the worker count.
const THREADS_ENV: &str = "MDEP_CLT_THREADS";
const DEFAULT_OUT: &str = "mdep-clt-out";

#[derive(Debug, Parser)]
#[command(name = "mdep-clt", version, about = "Normal-approximation bounds for m-dependent arrays")]
struct Cli {
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates k
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Output directory for CSV tables and the manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log-spaced truncation grid, "min:max:points"
    #[arg(long = "c-grid", global = true)]
    c_grid: Option<String>,
    /// Metrics for `estimate`: W, K, TV (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    metric: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimized d_W bound with derived d_K and TV bounds per sweep point
    Bounds,
    /// Empirical distances to the standard normal per sweep point
    Estimate,
    /// Exact identity and inequality checks on random finite chains
    VerifyInternals {
        #[arg(long, hide = true)]
        inject_mutation: bool,
    },
    /// Tables for a built-in example
    Reproduce { id: ExampleId },
}

#[derive(Serialize)]
struct ReproduceConfig {
    example: ExampleId,
    seed: u64,
    replicates: usize,
    bins: usize,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.replicates.is_some() {
        cfg.replicates = cli.replicates;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.c_grid.is_some() {
        cfg.c_grid = cli.c_grid.clone();
    }
    if !cli.metric.is_empty() {
        cfg.metrics = Some(cli.metric.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = effective_config(&cli)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    // the output location does not change results, so it stays out of the hash
    let mut hashed = cfg.clone();
    hashed.out = None;
    match cli.command {
        Command::Bounds => {
            let tables = commands::cmd_bounds(&cfg)?;
            output::emit(&out, "bounds", &hashed, cfg.seed(), cfg.replicates(), &tables)?;
        }
        Command::Estimate => {
            let tables = commands::cmd_estimate(&cfg)?;
            output::emit(&out, "estimate", &hashed, cfg.seed(), cfg.replicates(), &tables)?;
        }
        Command::VerifyInternals { inject_mutation } => {
            let run = commands::cmd_verify_internals(&cfg, inject_mutation)?;
            output::emit(&out, "verify-internals", &hashed, cfg.seed(), 0, &[run.table])?;
            if !run.failures.is_empty() {
                for f in &run.failures {
                    eprintln!("FAIL {f}");
                }
                return Err(CliError::CheckFailed(format!("{} check(s) failed", run.failures.len())));
            }
            eprintln!("all checks passed");
        }
        Command::Reproduce { id } => {
            let rc = ReproduceConfig {
                example: id,
                seed: cfg.seed(),
                replicates: cfg.replicates.unwrap_or(id.default_replicates()),
                bins: cfg.bins.unwrap_or(DEFAULT_BINS),
            };
            let tables = commands::cmd_reproduce(id, rc.seed, rc.replicates, rc.bins)?;
            let command = format!("reproduce {}", id.as_str());
            output::emit(&out, &command, &rc, rc.seed, rc.replicates, &tables)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
