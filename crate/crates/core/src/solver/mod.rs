//! Discounted value iteration on finite belief MDPs and policy extension.

mod models;
mod policy;

pub use models::{KnownPoseMdp, TabularMdp};
pub use policy::{extend_policy, Policy, PolicyMeta, ValueFunction};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("transition row (state {state}, action {action}) sums to {sum}")]
    NonStochasticRow { state: usize, action: usize, sum: f64 },
    #[error("belief branch row (pose {pose}, belief {belief}) sums to {sum}")]
    NonStochasticBranch { pose: usize, belief: usize, sum: f64 },
    #[error("discount must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("pose ({0}, {1}) lies outside the workspace")]
    PoseOutside(f64, f64),
    #[error("policy metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error(transparent)]
    Quantization(#[from] crate::quantization::QuantizationError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// A finite MDP in the form value iteration needs.
pub trait FiniteMdp: Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Stage costs, row-major over `(state, action)`.
    fn costs(&self) -> Vec<f64>;
    /// `out[s * A + a] = sum_s' P(s' | s, a) v[s']`.
    fn expect(&self, v: &[f64], out: &mut [f64]);
    /// Checks that every transition row is a distribution.
    fn validate(&self) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { beta: 0.95, tol: 1e-6, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||V_{k+1} - V_k||_inf` per sweep.
    pub gaps: Vec<f64>,
    /// Successive gap ratios.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Stopping threshold on the gap, `tol (1 - beta) / (2 beta)`.
    pub threshold: f64,
    /// `||T V - V||_inf` at the returned value function.
    pub bellman_residual: f64,
}

impl SolveReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    /// Every sweep contracted by at most `beta` (plus `1e-9`).
    pub fn contraction_holds(&self, beta: f64) -> bool {
        self.ratios.iter().all(|r| *r <= beta + 1e-9)
    }
}

/// Actions whose Q-value is within this relative margin of the minimum count as tied.
const TIE_MARGIN: f64 = 1e-10;

fn greedy(q: &[f64]) -> (usize, f64) {
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let margin = TIE_MARGIN * min.abs().max(1.0);
    let a = q.iter().position(|&x| x <= min + margin).expect("non-empty action set");
    (a, min)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Synchronous value iteration from `V_0 = 0`.
///
/// Iterates are tracked through their increments `d_k = V_{k+1} - V_k`, so
/// that the Q-table update `Q_{k+1} = Q_k + beta P d_k` and the gap are
/// computed at the scale of the increment rather than of `V`. Stops when the
/// gap falls below `tol (1 - beta) / (2 beta)`, then extracts the greedy
/// policy with one full Bellman pass (near-ties go to the lowest action).
pub fn value_iteration<M: FiniteMdp>(model: &M, opts: &SolveOptions) -> Result<(Vec<f64>, Vec<u16>, SolveReport)> {
    if !(opts.beta > 0.0 && opts.beta < 1.0) {
        return Err(SolverError::InvalidBeta(opts.beta));
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidTolerance(opts.tol));
    }
    model.validate()?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let beta = opts.beta;
    let threshold = opts.tol * (1.0 - beta) / (2.0 * beta);
    let costs = model.costs();
    let mut q = costs.clone();
    let mut v: Vec<f64> = q.chunks(na).map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let mut d = v.clone();
    let mut e = vec![0.0; ns * na];
    let mut gaps = vec![sup_norm(&d)];
    let mut ratios = Vec::new();
    let mut iterations = 1;
    while gaps[gaps.len() - 1] >= threshold && iterations < opts.max_iter {
        model.expect(&d, &mut e);
        q.par_chunks_mut(na)
            .zip(e.par_chunks(na))
            .zip(d.par_iter_mut().zip(v.par_iter_mut()))
            .for_each(|((qs, es), (ds, vs))| {
                let best = qs.iter().copied().fold(f64::INFINITY, f64::min);
                let mut inc = f64::INFINITY;
                for (qa, ea) in qs.iter_mut().zip(es) {
                    inc = inc.min((*qa - best) + beta * ea);
                    *qa += beta * ea;
                }
                *ds = inc;
                *vs += inc;
            });
        let gap = sup_norm(&d);
        let prev = gaps[gaps.len() - 1];
        if prev > 0.0 {
            ratios.push(gap / prev);
        }
        gaps.push(gap);
        iterations += 1;
    }
    let converged = gaps[gaps.len() - 1] < threshold;

    model.expect(&v, &mut e);
    let (policy, residual): (Vec<u16>, f64) = {
        let pairs: Vec<(u16, f64)> = costs
            .par_chunks(na)
            .zip(e.par_chunks(na))
            .zip(v.par_iter())
            .map(|((cs, es), vs)| {
                let qs: Vec<f64> = cs.iter().zip(es).map(|(c, x)| c + beta * x).collect();
                let (a, min) = greedy(&qs);
                (a as u16, (min - vs).abs())
            })
            .collect();
        let residual = pairs.iter().fold(0.0, |m: f64, p| m.max(p.1));
        (pairs.into_iter().map(|p| p.0).collect(), residual)
    };
    let report = SolveReport { iterations, gaps, ratios, converged, threshold, bellman_residual: residual };
    Ok((v, policy, report))
}
