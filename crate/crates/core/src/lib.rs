//! Finite approximations of active landmark mapping posed as a belief-cost
//! POMDP: quantized kernels, simplex belief grids, Bayesian filtering, value
//! iteration and a common-random-number evaluation harness.

pub mod metrics;
pub mod belief;
pub mod cache;
pub mod config;
pub mod costs;
pub mod evaluation;
pub mod instance;
pub mod models;
pub mod quantization;
pub mod solver;
