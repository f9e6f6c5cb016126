//! `amod`: regulation runs, closed-loop simulations, controller comparisons
//! and the LP-file bridge to external solvers.
//!
//! Exit status: 0 on success, 1 when a run fails or does not converge, 2 on
//! a configuration or usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::SolverChoice;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<amod_core::sim::SimError> for CliError {
    fn from(e: amod_core::sim::SimError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "amod", version, about = "Receding-horizon dispatch for autonomous mobility-on-demand fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags accepted by every subcommand; each replaces its config entry.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Run this seed only.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Horizon-problem solver.
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverChoice>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive the waiting customers of a zero-arrival scenario to zero with
    /// one predictive controller.
    Regulate { config: PathBuf },
    /// Run every configured controller on every seed and export traces.
    Simulate { config: PathBuf },
    /// Run every controller on the same arrivals and tabulate peak waits.
    Compare { config: PathBuf },
    /// Write the horizon problem for one state snapshot as an LP file.
    ExportLp {
        config: PathBuf,
        /// State snapshot (JSON).
        #[arg(long)]
        state: PathBuf,
        /// Index into the config's controller list.
        #[arg(long, default_value_t = 0)]
        controller: usize,
        /// LP file to write; defaults to `step.lp` in the output directory.
        #[arg(long)]
        lp: Option<PathBuf>,
    },
    /// Read a solver's solution file for an exported problem and print the
    /// first control.
    ImportSol {
        config: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 0)]
        controller: usize,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Bin a trip-record CSV into a piecewise-constant rate schedule.
    Ingest {
        #[arg(long)]
        trips: PathBuf,
        #[arg(long)]
        stations: usize,
        /// Steps per rate piece.
        #[arg(long)]
        bin_width: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let o = &cli.overrides;
    let result = match &cli.command {
        Command::Regulate { config } => commands::regulate(config, o),
        Command::Simulate { config } => commands::simulate(config, o),
        Command::Compare { config } => commands::compare(config, o),
        Command::ExportLp {
            config,
            state,
            controller,
            lp,
        } => commands::export_lp(config, state, *controller, lp.as_deref(), o),
        Command::ImportSol {
            config,
            state,
            controller,
            solution,
        } => commands::import_sol(config, state, *controller, solution, o),
        Command::Ingest {
            trips,
            stations,
            bin_width,
        } => commands::ingest(trips, *stations, *bin_width, o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amod: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
