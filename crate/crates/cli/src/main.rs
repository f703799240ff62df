//! `spectra`: spiked covariance analysis from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 assumption
//! check failed (the report is still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spectra", version, about = "Spiked sample covariance analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Flags {
    /// Experiment config, JSON or TOML (by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Density grid points [default: 512].
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Multiplier on theoretical rates in simulation checks [default: 3].
    #[arg(long, global = true)]
    pub slack: Option<f64>,
    /// Lower bound used by the assumption checks [default: 0.01].
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Outlier exponent ε₀ [default: 0.05].
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    /// Bulk exponent ε₁ [default: 0.02].
    #[arg(long, global = true)]
    pub eps1: Option<f64>,
    /// Outlier separation c₀ [default: a quarter of the smallest critical gap].
    #[arg(long, global = true)]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Bulk structure, assumption checks and outlier predictions (analyze.json).
    Analyze,
    /// Limiting density on [0, 1.1·a₁] (density.csv) and classical locations (gamma.csv).
    Density,
    /// Monte Carlo replicates with theorem checks (simulate.json, simulate.csv).
    Simulate,
    /// Shrink a sample spectrum (shrink.csv).
    Shrink,
    /// Oracle estimator d̂ (oracle.csv, oracle.json).
    Oracle,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SPECTRA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command, &cli.flags) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::AssumptionFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
