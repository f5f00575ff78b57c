//! `coherency` command-line tool: simulate synthetic multi-contingency
//! frequency datasets, cluster them into coherent regions by multi-view
//! consensus, and render report bundles.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or
//! validation failure.

mod commands;
mod config;
mod io_util;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::process::ExitCode;

/// A failure, classified for the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or invalid input data (exit 2).
    Config(anyhow::Error),
    /// Failure while doing the work (exit 1).
    Runtime(anyhow::Error),
}

#[derive(Parser)]
#[command(
    name = "coherency",
    version,
    about = "Multi-view consensus clustering of bus-frequency responses into coherent regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-contingency dataset with planted areas.
    Simulate(Overrides),
    /// Cluster a dataset into coherent regions via consensus optimization.
    Cluster(Overrides),
    /// Render SVG/CSV report artifacts from cluster outputs.
    Report(Overrides),
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let overrides = match &cli.command {
        Command::Simulate(o) | Command::Cluster(o) | Command::Report(o) => o,
    };

    let config = RunConfig::resolve(overrides).map_err(CliError::Config)?;

    if let Some(threads) = config.threads {
        // A second build_global in one process is fine to ignore: the
        // pool keeps its first configuration.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    match cli.command {
        Command::Simulate(_) => commands::cmd_simulate(&config),
        Command::Cluster(_) => commands::cmd_cluster(&config),
        Command::Report(_) => commands::cmd_report(&config),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(CliError::Config(err)) => {
            eprintln!("configuration error: {err:#}");
            ExitCode::from(2)
        }
    }
}
