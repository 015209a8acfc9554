//! Monte Carlo evaluation: paired episodes, terminal statistics, weight
//! sweeps and checks of the belief-cost identities.

mod episode;
mod rng;
mod stats;
mod sweep;
mod theory;

pub use episode::{run_trials, simulate_episode, Controller, EpisodeRecord, EpisodeSpec, Simulator, StepRecord};
pub use rng::{stream, trial_key, trial_seed, Purpose};
pub use stats::{cvar_sorted, mean_ci, quantile_sorted, std_error, terminal_stats, TerminalStats};
pub use sweep::{lambda_sweep, AgreementRow, BaselineRow, BestRow, GapRow, SweepResult, SweepRow, SweepSpec};
pub use theory::{discounted_costs, cost_equivalence_check, EquivalenceCheck};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no episode records")]
    EmptySet,
    #[error("episode records have different lengths")]
    RaggedRecords,
    #[error("prior has {got} entries, map space has {expected}")]
    PriorMismatch { expected: usize, got: usize },
    #[error("true map {0} is not a map atom")]
    MapOutOfRange(usize),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Quantization(#[from] crate::quantization::QuantizationError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
