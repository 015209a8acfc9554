//! Belief-dependent exploration costs and the combined stage cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::DistanceMatrix;
use crate::quantization::SimplexGrid;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("belief has {got} entries, distance matrix has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exploration weight must be non-negative and finite, got {0}")]
    InvalidLambda(f64),
    #[error("discount must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
}

pub type Result<T> = std::result::Result<T, CostError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplorationKind {
    Rao,
    Shannon,
}

impl ExplorationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rao => "rao",
            Self::Shannon => "shannon",
        }
    }
}

impl std::str::FromStr for ExplorationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rao" => Ok(Self::Rao),
            "shannon" => Ok(Self::Shannon),
            other => Err(format!("unknown exploration cost '{other}'")),
        }
    }
}

/// `sum_ij b_i b_j d_ij`, the expected transport cost from `b` to a point
/// mass drawn from `b`.
pub fn rao_entropy(b: &[f64], d: &DistanceMatrix) -> Result<f64> {
    if b.len() != d.len() {
        return Err(CostError::DimensionMismatch { expected: d.len(), got: b.len() });
    }
    let mut total = 0.0;
    for (i, bi) in b.iter().enumerate() {
        if *bi > 0.0 {
            total += bi * d.row(i).iter().zip(b).map(|(dij, bj)| dij * bj).sum::<f64>();
        }
    }
    Ok(total)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(b: &[f64]) -> f64 {
    -b.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// `H(b) - sum_j p_j H(b_j)` for a sparse belief-transition row.
pub fn information_gain(b: &[f64], next: &[u32], prob: &[f64], grid: &SimplexGrid) -> f64 {
    let after: f64 = next.iter().zip(prob).map(|(&j, p)| p * shannon_entropy(&grid.probabilities(j as usize))).sum();
    shannon_entropy(b) - after
}

/// Squared control magnitude.
pub fn effort(u: &[f64]) -> f64 {
    u.iter().map(|c| c * c).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub lambda: f64,
    pub beta: f64,
    pub kind: ExplorationKind,
    /// Divides the raw exploration cost so that it lies in `[0, 1]`:
    /// the map diameter for Rao entropy, `ln m` for Shannon entropy.
    pub normalizer: f64,
}

impl CostConfig {
    pub fn new(lambda: f64, beta: f64, kind: ExplorationKind, d: &DistanceMatrix) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CostError::InvalidLambda(lambda));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CostError::InvalidBeta(beta));
        }
        let normalizer = match kind {
            ExplorationKind::Rao => d.diameter(),
            ExplorationKind::Shannon => (d.len() as f64).ln(),
        };
        Ok(Self { lambda, beta, kind, normalizer })
    }

    /// Normalised exploration cost in `[0, 1]`.
    pub fn exploration(&self, b: &[f64], d: &DistanceMatrix) -> Result<f64> {
        let raw = match self.kind {
            ExplorationKind::Rao => rao_entropy(b, d)?,
            ExplorationKind::Shannon => {
                if b.len() != d.len() {
                    return Err(CostError::DimensionMismatch { expected: d.len(), got: b.len() });
                }
                shannon_entropy(b)
            }
        };
        Ok(if self.normalizer > 0.0 { raw / self.normalizer } else { 0.0 })
    }

    /// Upper bound on the stage cost over actions of speed at most `v_max`.
    pub fn cost_bound(&self, v_max: f64) -> f64 {
        self.lambda + v_max * v_max
    }
}

/// `lambda * rho(b) + |u|^2`.
pub fn stage_cost(b: &[f64], u: &[f64], cfg: &CostConfig, d: &DistanceMatrix) -> Result<f64> {
    Ok(cfg.lambda * cfg.exploration(b, d)? + effort(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantization::enumerate_simplex_grid;
    use approx::assert_abs_diff_eq;

    fn corners() -> DistanceMatrix {
        DistanceMatrix::euclidean(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])
    }

    #[test]
    fn rao_examples() {
        let d = corners();
        assert_eq!(rao_entropy(&[0.0, 0.0, 1.0, 0.0], &d).unwrap(), 0.0);
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                oracle += d.get(i, j) / 16.0;
            }
        }
        let r = rao_entropy(&[0.25; 4], &d).unwrap();
        assert_abs_diff_eq!(r, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(r, (8.0 + 4.0 * 2f64.sqrt()) / 16.0, epsilon = 1e-15);
        let two = DistanceMatrix::euclidean(&[vec![0.0], vec![3.0]]);
        assert_abs_diff_eq!(rao_entropy(&[0.5, 0.5], &two).unwrap(), 1.5, epsilon = 1e-15);
        assert!(rao_entropy(&[1.0], &d).is_err());
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0]), 0.0);
        assert_abs_diff_eq!(shannon_entropy(&[0.25; 4]), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn stage_cost_examples() {
        let d = corners();
        let cfg = CostConfig::new(200.0, 0.95, ExplorationKind::Rao, &d).unwrap();
        assert_eq!(stage_cost(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0], &cfg, &d).unwrap(), 0.0);
        // the two far corners carry the full normalized exploration cost
        let two = DistanceMatrix::euclidean(&[vec![0.0], vec![1.0]]);
        let cfg = CostConfig { normalizer: 0.5, ..CostConfig::new(200.0, 0.95, ExplorationKind::Rao, &two).unwrap() };
        assert_abs_diff_eq!(stage_cost(&[0.5, 0.5], &[1.0, 0.0], &cfg, &two).unwrap(), 201.0, epsilon = 1e-12);
    }

    #[test]
    fn stage_cost_bounded_on_grid() {
        let d = corners();
        let grid = enumerate_simplex_grid(4, 5).unwrap();
        for kind in [ExplorationKind::Rao, ExplorationKind::Shannon] {
            let cfg = CostConfig::new(50.0, 0.9, kind, &d).unwrap();
            for i in 0..grid.len() {
                for u in [[0.0, 0.0], [0.2, 0.0], [0.1, -0.1]] {
                    let c = stage_cost(&grid.probabilities(i), &u, &cfg, &d).unwrap();
                    assert!((0.0..=cfg.cost_bound(0.2) + 1e-12).contains(&c));
                }
            }
        }
    }

    #[test]
    fn information_gain_extremes() {
        let grid = enumerate_simplex_grid(2, 2).unwrap();
        let uniform = grid.index_of(&[1, 1]).unwrap() as u32;
        assert_abs_diff_eq!(information_gain(&[0.5, 0.5], &[uniform], &[1.0], &grid), 0.0, epsilon = 1e-15);
        let a = grid.index_of(&[2, 0]).unwrap() as u32;
        let b = grid.index_of(&[0, 2]).unwrap() as u32;
        assert_abs_diff_eq!(information_gain(&[0.5, 0.5], &[a, b], &[0.5, 0.5], &grid), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn parameter_validation() {
        let d = corners();
        assert!(CostConfig::new(-1.0, 0.9, ExplorationKind::Rao, &d).is_err());
        assert!(CostConfig::new(1.0, 1.0, ExplorationKind::Rao, &d).is_err());
        assert_eq!("shannon".parse::<ExplorationKind>().unwrap(), ExplorationKind::Shannon);
    }
}
