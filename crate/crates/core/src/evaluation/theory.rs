use rand::Rng;
use rayon::prelude::*;

use crate::config::Tracking;
use crate::costs::{rao_entropy, CostConfig};
use crate::instance::Instance;
use crate::metrics::wasserstein_to_dirac;
use crate::models::Point2;

use super::episode::{sample_index, simulate_episode, Controller, EpisodeSpec, Simulator};
use super::rng::{stream, Purpose};
use super::stats::{mean_ci, std_error};
use super::Result;

/// Paired Monte Carlo estimates of the pathwise cost `sum beta^t W1(b_t, delta_M)`
/// with `M ~ prior`, and of the belief cost `sum beta^t W1~(b_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCheck {
    pub j_pathwise: f64,
    pub j_belief: f64,
    pub se_pathwise: f64,
    pub se_belief: f64,
    /// Standard error of the per-trial difference.
    pub se_paired: f64,
    /// `beta^T rho_max / (1 - beta)`.
    pub tail_bound: f64,
    /// `3 sqrt(se_pathwise^2 + se_belief^2) + tail_bound`.
    pub tolerance: f64,
}

impl EquivalenceCheck {
    pub fn gap(&self) -> f64 {
        (self.j_pathwise - self.j_belief).abs()
    }

    pub fn passes(&self) -> bool {
        self.gap() <= self.tolerance
    }
}

/// Runs `n` episodes in the quantized-state simulator with exact map beliefs,
/// the true map drawn from `prior`, truncated after `t_trunc` steps.
pub fn cost_equivalence_check(
    inst: &Instance,
    controller: Controller<'_>,
    prior: &[f64],
    start: Point2,
    n: usize,
    t_trunc: usize,
    beta: f64,
    seed: u64,
) -> Result<EquivalenceCheck> {
    let d = inst.skeleton.maps.atoms().distances();
    let spec = EpisodeSpec {
        instance: inst,
        horizon: t_trunc,
        tracking: Tracking::Exact,
        simulator: Simulator::Quantized,
        start,
        prior,
        master_seed: seed,
        keep_beliefs: true,
    };
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let u: f64 = stream(seed, k as u64, Purpose::Map).random();
            let true_map = sample_index(prior, u);
            let rec = simulate_episode(&spec, controller, k, true_map)?;
            let mut pathwise = 0.0;
            let mut belief = 0.0;
            let mut w = 1.0;
            for b in rec.beliefs.iter().take(t_trunc) {
                pathwise += w * wasserstein_to_dirac(b, true_map, d).expect("belief over map atoms");
                belief += w * rao_entropy(b, d).expect("belief over map atoms");
                w *= beta;
            }
            Ok((pathwise, belief))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (se_pathwise, se_belief) = (std_error(&a), std_error(&b));
    let tail_bound = beta.powi(t_trunc as i32) * d.diameter() / (1.0 - beta);
    Ok(EquivalenceCheck {
        j_pathwise: mean_ci(&a).0,
        j_belief: mean_ci(&b).0,
        se_pathwise,
        se_belief,
        se_paired: std_error(&diff),
        tail_bound,
        tolerance: 3.0 * se_pathwise.hypot(se_belief) + tail_bound,
    })
}

/// Per-trial truncated discounted cost `sum_{t < T} beta^t (lambda rho(b_t) + |u_t|^2)`
/// of a controller in the quantized-state simulator, `M ~ prior`, exact beliefs.
pub fn discounted_costs(
    inst: &Instance,
    controller: Controller<'_>,
    cost: &CostConfig,
    prior: &[f64],
    start: Point2,
    n: usize,
    t_trunc: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = inst.skeleton.maps.atoms().distances();
    let spec = EpisodeSpec {
        instance: inst,
        horizon: t_trunc,
        tracking: Tracking::Exact,
        simulator: Simulator::Quantized,
        start,
        prior,
        master_seed: seed,
        keep_beliefs: true,
    };
    (0..n)
        .into_par_iter()
        .map(|k| {
            let u: f64 = stream(seed, k as u64, Purpose::Map).random();
            let rec = simulate_episode(&spec, controller, k, sample_index(prior, u))?;
            let mut total = 0.0;
            let mut w = 1.0;
            for (step, b) in rec.steps.iter().zip(&rec.beliefs).take(t_trunc) {
                let a = step.action.expect("action before the horizon");
                let u = inst.skeleton.actions.point(a);
                total += w * (cost.lambda * cost.exploration(b, d).expect("belief over map atoms") + u[0] * u[0] + u[1] * u[1]);
                w *= cost.beta;
            }
            Ok(total)
        })
        .collect()
}
