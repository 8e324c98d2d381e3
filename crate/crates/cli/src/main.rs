//! `mobch`: run, probe and diagnose Cahn–Hilliard simulations from plain
//! config files.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 solver
//! divergence, 3 a checked invariant or estimate failed.

// `!(x > 0.0)` checks are meant to reject NaN too; index loops mirror the stencils
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "mobch", version, about = "Cahn–Hilliard simulations with nonconstant mobility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory and write its energy series.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every snapshot of u and w under <out>/snapshots.
        #[arg(long)]
        snapshots: bool,
    },
    /// Run a random ensemble and write covering statistics.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the estimates on a trajectory written by `run --snapshots`.
    Diagnose {
        /// Output directory of the run.
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Where to write the report; defaults to the trajectory directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate W, W', β, β_n and W_n on a uniform r-grid.
    PotentialTable {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to -2, or just inside -1 for the logarithmic potential.
        #[arg(long, allow_hyphen_values = true)]
        r_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        r_max: Option<f64>,
        #[arg(long, default_value_t = 401)]
        samples: usize,
        /// Directory for potential_table.csv; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Solver(mobch::Error),
    #[error("{0}")]
    Diagnostic(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Diagnostic(_) => 3,
        }
    }
}

/// Nonlinear solver failures, possibly wrapped with their step or member.
fn is_solver_failure(e: &mobch::Error) -> bool {
    use mobch::Error as E;
    match e {
        E::NewtonDivergence { .. } | E::ConvergenceFailure { .. } => true,
        E::AtStep { source, .. } | E::EnsembleMember { source, .. } => is_solver_failure(source),
        _ => false,
    }
}

impl From<mobch::Error> for CliError {
    fn from(e: mobch::Error) -> Self {
        if is_solver_failure(&e) {
            CliError::Solver(e)
        } else {
            CliError::Config(ConfigError::Invalid(e))
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MOBCH_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MOBCH_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out, snapshots } => commands::run(&config, &out, snapshots),
        Command::Ensemble { config, out } => commands::ensemble(&config, &out),
        Command::Diagnose { traj, config, out } => commands::diagnose(&traj, &config, out.as_deref()),
        Command::PotentialTable {
            config,
            r_min,
            r_max,
            samples,
            out,
        } => commands::potential_table(&config, r_min, r_max, samples, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("mobch: {e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mobch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
