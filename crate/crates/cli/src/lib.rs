//! Command-line pipeline: build model tables, solve, evaluate, sweep and
//! verify. The binary in `main.rs` is a thin wrapper over [`run`].

pub mod args;
pub mod commands;
pub mod output;
pub mod verify;

use std::fmt;

use activeslam_core::cache::CacheError;
use activeslam_core::config::ConfigError;

pub use args::{Cli, Command};

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Cache(String),
    Verification(String),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Other(_) => 1,
            Self::Config(_) => 2,
            Self::Cache(_) => 3,
            Self::Verification(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Cache(m) => write!(f, "cache error: {m}"),
            Self::Verification(m) => write!(f, "verification failed: {m}"),
            Self::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<CacheError> for Failure {
    fn from(e: CacheError) -> Self {
        Self::Cache(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Other(e)
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

/// Runs one subcommand, writing human-readable progress to `log`.
pub fn run(cli: &Cli, log: &mut dyn std::io::Write) -> Result<()> {
    let ctx = commands::Context::load(cli)?;
    match &cli.command {
        Command::Build => commands::build(&ctx, log).map(|_| ()),
        Command::Solve { kind, lambda } => commands::solve(&ctx, *kind, *lambda, log).map(|_| ()),
        Command::Evaluate { kind, lambda } => commands::evaluate(&ctx, *kind, *lambda, log),
        Command::Sweep => commands::sweep(&ctx, log),
        Command::Verify { inject_fault, quick } => commands::verify(&ctx, *inject_fault, *quick, log),
    }
}
