use std::path::PathBuf;

use activeslam_core::costs::ExplorationKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(name = "activeslam", version, about = "Belief-MDP planning for active landmark mapping")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides `evaluation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true, env = "ACTIVESLAM_OUT")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Build and cache the quantized model tables.
    Build,
    /// Solve the cached model by value iteration and write the policy file.
    Solve {
        /// Overrides `cost.kind`.
        #[arg(long)]
        kind: Option<ExplorationKind>,
        /// Overrides `cost.lambda`.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run paired trials of a solved policy and the random baseline.
    Evaluate {
        #[arg(long)]
        kind: Option<ExplorationKind>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Sweep cost kinds, weights and noise settings.
    Sweep,
    /// Run the oracle checks.
    Verify {
        /// Corrupt one kernel row before the stochasticity check.
        #[arg(long)]
        inject_fault: bool,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}
