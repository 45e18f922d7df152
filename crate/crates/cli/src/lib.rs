//! Command-line front end for the SPARC toolkit.
//!
//! Four subcommands share one flat JSON config: `se` writes the
//! state-evolution table, `sim` runs a Monte Carlo batch, `sweep` repeats a
//! batch over a grid of section sizes and `bounds` evaluates the
//! finite-length deviation bound. Every output starts with the tool version
//! and the fully resolved config, and identical configs give byte-identical
//! files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sparc_core::Error;

pub use config::{ExperimentConfig, Format};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] Error),
    /// Too many trials failed numerically.
    #[error("{failures} of {trials} trials failed")]
    FailureBudget { failures: u64, trials: u64 },
}

impl CliError {
    /// 1: usage or config, 2: mathematical precondition, 3: numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => core_exit_code(e),
            CliError::FailureBudget { .. } => 3,
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::RateAboveCapacity { .. } | Error::NonConvergence { .. } | Error::Precondition(_) => 2,
        Error::NumericFailure { .. } => 3,
        Error::Trial { source, .. } => core_exit_code(source),
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparc", version, about = "Sparse superposition codes with AMP decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// State-evolution table.
    Se(Common),
    /// Monte Carlo batch: per-trial CSV and aggregate JSON.
    Sim(Common),
    /// Batch per section size in a grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated section sizes, overriding `M_grid`.
        #[arg(long = "m-grid", value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
    },
    /// Finite-length deviation bound.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Iteration count, overriding `bound_T`; defaults to the
        /// state-evolution `T`.
        #[arg(long = "T")]
        t: Option<usize>,
        /// Section error rate threshold, overriding `bound_epsilon`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `num_trials`.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Overrides `parallelism`.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

impl Common {
    /// Loads the config file and applies command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.config.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.num_trials = trials;
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = p;
        }
        if let Some(out) = &self.out {
            cfg.path = Some(out.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Se(common) => commands::se(&common.resolve()?),
        Command::Sim(common) => commands::sim(&common.resolve()?),
        Command::Sweep { common, m_grid } => {
            let mut cfg = common.resolve()?;
            if m_grid.is_some() {
                cfg.M_grid = m_grid;
            }
            commands::sweep(&cfg)
        }
        Command::Bounds { common, t, epsilon } => {
            let mut cfg = common.resolve()?;
            if t.is_some() {
                cfg.bound_T = t;
            }
            if epsilon.is_some() {
                cfg.bound_epsilon = epsilon;
            }
            commands::bounds(&cfg)
        }
    }
}
