//! Batch front end for `diffbem`: sphere validation, field solves, gradient
//! checks, shape optimization and Mie-series dumps, each driven by a TOML
//! run file.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("acceptance check failed: {0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Acceptance(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F64,
    /// Reserved; rejected at startup.
    F32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Rigid unit-sphere scattering against the Mie series.
    ValidateSphere,
    /// Adjoint gradient against central finite differences.
    GradCheck,
    /// Assemble, solve and evaluate the field at the configured points.
    Solve,
    /// L-BFGS shape optimization into a run directory.
    Optimize,
    /// Mie-series scattered field at the configured points.
    Mie,
}

#[derive(Debug, Parser)]
#[command(name = "diffbem", version, about = "Differentiable 3D acoustic BEM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "f64")]
    pub precision: Precision,
}

/// Parse the run file, set up the thread pool and dispatch.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.precision == Precision::F32 {
        return Err(CliError::Config("--precision f32 is reserved; only f64 is implemented".into()));
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let cfg = config::RunConfig::parse(&text, &base)?;
    std::fs::create_dir_all(&cli.out)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::ValidateSphere => acceptance(commands::validate_sphere(&cfg, &cli.out)?.failures),
        Command::GradCheck => acceptance(commands::grad_check(&cfg, &cli.out)?.failures),
        Command::Solve => commands::solve(&cfg, &cli.out).map(drop),
        Command::Optimize => commands::optimize(&cfg, &text, &cli.out).map(drop),
        Command::Mie => commands::mie(&cfg, &cli.out).map(drop),
    })
}

fn acceptance(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(failures.join("; ")))
    }
}
