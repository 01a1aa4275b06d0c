//! `relwave <subcommand> <config.toml> [section.key=value ...]`
//!
//! Exit codes: 0 when every check passes, 1 on a check or numerical
//! failure, 2 on a usage or configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Failure(String),
}

impl From<relwave::Error> for CliError {
    fn from(e: relwave::Error) -> Self {
        use relwave::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::AxisOutOfRange { .. }
            | E::DimensionMismatch(_)
            | E::ComponentOutOfRange { .. }
            | E::InvalidParameter(_)
            | E::NotTranslationInvariant(_)
            | E::DimensionCap { .. }
            | E::Missing(_)
            | E::TooFewSamples { .. }
            | E::Io(_)
            | E::Format(_) => CliError::Config(e.to_string()),
            E::SingularSystem(_) | E::IllConditioned { .. } | E::OutsideSpan { .. } | E::Defective(_) => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "relwave", version, about = "Relativistic wave equations on periodic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides of the form `section.key=value`.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the companion Hamiltonian (Matrix Market) and a system descriptor.
    Reduce(RunArgs),
    /// Integrate the model and write the trajectory CSV and final snapshot.
    Evolve(RunArgs),
    /// Write Γ(t), lifting residuals and a transport-law report.
    Transport(RunArgs),
    /// Run the invariant suite and write JSON and text reports.
    Verify(RunArgs),
    /// Write the exact per-mode spectra.
    Oracle(RunArgs),
    /// Fit the convergence order over a halving dt ladder.
    Convergence(RunArgs),
}

type Handler = fn(&config::RunConfig) -> Result<bool, CliError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let (args, cmd): (&RunArgs, Handler) = match &cli.command {
        Command::Reduce(a) => (a, commands::reduce),
        Command::Evolve(a) => (a, commands::evolve),
        Command::Transport(a) => (a, commands::transport),
        Command::Verify(a) => (a, commands::verify),
        Command::Oracle(a) => (a, commands::oracle),
        Command::Convergence(a) => (a, commands::convergence),
    };
    let cfg = config::load(&args.config, &args.overrides)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("relwave: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("relwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
