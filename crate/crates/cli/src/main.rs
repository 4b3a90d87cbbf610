//! `longrun-npc`: simulate, extract, validate, check criteria, apply
//! spectral operators and summarize runs.

mod criteria;
mod error;
mod extract;
mod io;
mod report;
mod simulate;
mod spectral;
mod validate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "longrun-npc", version, about = "Nonlinear principal components of stationary diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a stationary path and write it as CSV.
    Simulate(simulate::SimulateArgs),
    /// Extract principal components from samples or population forms.
    Extract(extract::ExtractArgs),
    /// Check extracted components; exits 1 when a required check fails.
    Validate(validate::ValidateArgs),
    /// Evaluate the existence criteria for a model and penalty.
    Criteria(criteria::CriteriaArgs),
    /// Apply transition, resolvent or long-run variance to a function.
    Spectral(spectral::SpectralArgs),
    /// Summarize extraction and validation output.
    Report(report::ReportArgs),
}

const THREADS_VAR: &str = "LONGRUN_NPC_THREADS";

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, found {text:?}")))?;
    // Fails only if a pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Extract(a) => extract::run(a),
        Command::Validate(a) => validate::run(a),
        Command::Criteria(a) => criteria::run(a),
        Command::Spectral(a) => spectral::run(a),
        Command::Report(a) => report::run(a),
    }
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
