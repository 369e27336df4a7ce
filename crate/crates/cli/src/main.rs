//! `fhr`: kernel evaluation, verification suites, solver runs and bound
//! checks for the FitzHugh-Rinzel system.
//!
//! Exit codes: 0 success, 1 verification failed, 2 input error,
//! 3 non-convergence.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::commands::Suite;
use crate::config::{ConfigError, RunConfig, Strictness};

#[derive(Debug, Parser)]
#[command(name = "fhr", version, about = "FitzHugh-Rinzel fundamental solution, solver and bound checks")]
struct Cli {
    /// Configuration file (flat `key = value` with [section] headers)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Progress and per-report detail on stderr
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate H1, H2, H and the pointwise bound at one point
    Kernel {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// Run a verification suite and print its residual table
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Solve with the configured data and write a run directory
    Solve {
        /// Run directory (overrides [output] dir)
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check a finished run against the a priori envelopes
    Bounds {
        /// Run directory written by `solve`
        run_dir: Option<PathBuf>,
        /// Same as RUN_DIR
        #[arg(long, value_name = "DIR", conflicts_with = "run_dir")]
        out: Option<PathBuf>,
    },
}

/// How a command failed, and the exit code that reports it.
#[derive(Debug)]
pub enum Failure {
    Verification(String),
    Input(anyhow::Error),
    NonConvergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Input(e) => write!(f, "{e:#}"),
            Failure::NonConvergence(m) => f.write_str(m),
        }
    }
}

impl From<fhr_core::Error> for Failure {
    fn from(e: fhr_core::Error) -> Self {
        use fhr_core::Error as E;
        match e {
            E::NonConvergence { .. } | E::Divergence(_) => Failure::NonConvergence(e.to_string()),
            E::Accuracy { .. } => Failure::Verification(e.to_string()),
            other => Failure::Input(other.into()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(inner) => Failure::Input(inner.into()),
            other => Failure::Input(other.into()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("FHR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(anyhow::anyhow!("FHR_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Kernel { x, t } => {
            let config = run::load_config(config_path, Strictness::Kernel)?;
            commands::kernel(&config, x, t)
        }
        Command::Verify { suite } => {
            let config = run::load_config(config_path, Strictness::Full)?;
            commands::verify(&config, suite)
        }
        Command::Solve { out } => {
            let config = run::load_config(config_path, Strictness::Full)?;
            let dir = run::context_dir(&config, out.as_deref());
            run::solve(&config, &dir, cli.verbose)
        }
        Command::Bounds { run_dir, out } => {
            let dir = match run_dir.or(out) {
                Some(d) => d,
                None => run::load_config(config_path, Strictness::Full)?.output_dir,
            };
            run::bounds(&dir, cli.verbose)
        }
    }
}

fn main() -> ExitCode {
    let defaults = format!("Configuration defaults (every key is optional):\n\n{}", RunConfig::default().emit());
    let command = Cli::command().after_long_help(defaults);
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
