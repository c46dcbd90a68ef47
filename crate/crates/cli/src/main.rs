//! `speqt`: simulate, bound, certify, and estimate a single-photon CHSH
//! experiment from a JSON run configuration.
//!
//! Exit status: 0 on success (for `certify`: certified; for `verify`: zero
//! violations), 1 when a gate fails, 2 on configuration or I/O errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use speqt_cli::commands::{
    cmd_bounds, cmd_certify, cmd_estimate, cmd_simulate, cmd_verify, Outcome,
};
use speqt_cli::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "speqt",
    version,
    about = "Single-photon CHSH simulation, error bounds, and min-entropy certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose the analytic error bounds for the configured setup.
    Bounds(ConfigArgs),
    /// Evaluate the post-selected CHSH value and certify min-entropy.
    Certify(ConfigArgs),
    /// Generate a detector-event sequence and its metadata sidecar.
    Simulate(ConfigArgs),
    /// Estimate channel probabilities from a recorded sequence.
    Estimate(EstimateArgs),
    /// Run the numerical verification suites against the analytic bounds.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path: the report, or for `simulate` the binary sequence.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Path to a binary sequence (its `.meta.json` sidecar must sit
    /// alongside).
    #[arg(long)]
    sequence: PathBuf,
    /// Two-sided confidence level for the Wald intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Report output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per Monte-Carlo suite.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Report output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bounds(args) => {
            let config = RunConfig::load(&args.config)?;
            let outcome = cmd_bounds(&config, args.seed)?;
            emit(&outcome, args.out.or(config.report_path))
        }
        Command::Certify(args) => {
            let config = RunConfig::load(&args.config)?;
            let outcome = cmd_certify(&config, args.seed)?;
            emit(&outcome, args.out.or(config.report_path))
        }
        Command::Simulate(args) => {
            let config = RunConfig::load(&args.config)?;
            let sequence_out = match args.out.clone().or(config.sequence_path.clone()) {
                Some(path) => path,
                None => bail!(
                    "simulate needs a sequence path: pass --out or set `sequence_path` \
                     in the config"
                ),
            };
            let outcome = cmd_simulate(&config, args.seed, &sequence_out)?;
            emit(&outcome, config.report_path)
        }
        Command::Estimate(args) => {
            let outcome = cmd_estimate(&args.sequence, args.level)?;
            emit(&outcome, args.out)
        }
        Command::Verify(args) => {
            let config = RunConfig::load(&args.config)?;
            let outcome = cmd_verify(&config, args.seed, args.trials)?;
            emit(&outcome, args.out.or(config.report_path))
        }
    }
}

/// Writes the report to the given path or stdout; returns the gate verdict.
fn emit(outcome: &Outcome, out: Option<PathBuf>) -> Result<bool> {
    match out {
        Some(path) => std::fs::write(&path, &outcome.report)?,
        None => std::io::stdout().write_all(&outcome.report)?,
    }
    Ok(outcome.gate_passed)
}
