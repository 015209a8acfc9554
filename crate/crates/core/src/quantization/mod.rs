//! Finite approximations: state lattices, action nets, observation partitions,
//! quantized kernels and the rational simplex grid over beliefs.

mod actions;
mod bound;
mod kernels;
mod lattice;
mod observations;
mod simplex;

pub use actions::{build_action_net, covering_radius_estimate};
pub use bound::quantization_error_bound;
pub use kernels::{observation_kernel, quantized_transition, KernelMatrix};
pub use lattice::{build_state_lattice, BoxLattice, FiniteSpace, MapSpace};
pub use observations::{build_observation_partition, ObsCell, ObservationPartition};
pub use simplex::{enumerate_simplex_grid, reznik_counts, reznik_quantize, SimplexGrid, DEFAULT_GRID_CAP};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizationError {
    #[error("resolution must be at least 1, got {0}")]
    InvalidResolution(usize),
    #[error("simplex grid with {atoms} atoms and denominator {denominator} has {count} points, above the cap {cap}")]
    GridTooLarge { atoms: usize, denominator: usize, count: u128, cap: u128 },
    #[error("kernel row (state {state}, action {action}) sums to {sum}")]
    NonStochasticRow { state: usize, action: usize, sum: f64 },
    #[error("kernel row (state {state}, action {action}) has invalid entry {value} at column {column}")]
    InvalidEntry { state: usize, action: usize, column: usize, value: f64 },
    #[error("belief has {got} entries, grid expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}

pub type Result<T> = std::result::Result<T, QuantizationError>;
