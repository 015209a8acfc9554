//! Discrete Bayes filtering and quantized belief transitions.

mod known_pose;
mod transition;

pub use known_pose::{build_known_pose_branches, KnownPoseBranches};
pub use transition::{build_belief_transition, BeliefTransition};

use thiserror::Error;

use crate::metrics::MASS_TOLERANCE;
use crate::quantization::{FiniteSpace, KernelMatrix, QuantizationError};

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("belief sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("belief entry {index} is {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("observation {observation} has zero likelihood under the predicted belief")]
    ImpossibleObservation { observation: usize },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transition row (belief {belief}, action {action}) sums to {sum}")]
    NonStochasticRow { belief: usize, action: usize, sum: f64 },
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
}

pub type Result<T> = std::result::Result<T, BeliefError>;

/// Probability vector over the points of a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(BeliefError::InvalidEntry { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(BeliefError::NotNormalized(sum));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn dirac(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Mean of the point coordinates under the belief.
    pub fn mean(&self, space: &FiniteSpace) -> Vec<f64> {
        assert_eq!(space.len(), self.len());
        let mut out = vec![0.0; space.point(0).len()];
        for (p, x) in self.0.iter().zip(space.points()) {
            for (o, c) in out.iter_mut().zip(x) {
                *o += p * c;
            }
        }
        out
    }
}

impl AsRef<[f64]> for BeliefVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(BeliefError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Observation kernels may be action-independent (a single action column).
fn obs_action(o: &KernelMatrix, u: usize) -> usize {
    if o.n_actions() == 1 {
        0
    } else {
        u
    }
}

/// Predicted state distribution `sum_s T(s' | s, u) b(s)`.
pub fn predict(b: &[f64], u: usize, t: &KernelMatrix) -> Result<Vec<f64>> {
    check_len(t.n_states(), b.len())?;
    let mut out = vec![0.0; t.n_cols()];
    for (s, p) in b.iter().enumerate() {
        if *p > 0.0 {
            for (o, q) in out.iter_mut().zip(t.row(s, u)) {
                *o += p * q;
            }
        }
    }
    Ok(out)
}

/// `G(y | b, u)`: distribution of the next observation cell.
pub fn predictive_observation(b: &[f64], u: usize, t: &KernelMatrix, o: &KernelMatrix) -> Result<Vec<f64>> {
    let pred = predict(b, u, t)?;
    check_len(o.n_states(), pred.len())?;
    let ou = obs_action(o, u);
    let mut g = vec![0.0; o.n_cols()];
    for (s, p) in pred.iter().enumerate() {
        if *p > 0.0 {
            for (gy, q) in g.iter_mut().zip(o.row(s, ou)) {
                *gy += p * q;
            }
        }
    }
    Ok(g)
}

/// Reweights `prior` by `likelihood` and normalises.
pub fn reweight(prior: &[f64], likelihood: impl Fn(usize) -> f64, observation: usize) -> Result<Vec<f64>> {
    let mut post: Vec<f64> = prior.iter().enumerate().map(|(s, p)| p * likelihood(s)).collect();
    let z: f64 = post.iter().sum();
    if !(z > 0.0) {
        return Err(BeliefError::ImpossibleObservation { observation });
    }
    post.iter_mut().for_each(|p| *p /= z);
    Ok(post)
}

/// One filter step: predict through `T(. | ., u)` then condition on cell `y`.
pub fn bayes_update(b: &BeliefVector, u: usize, y: usize, t: &KernelMatrix, o: &KernelMatrix) -> Result<BeliefVector> {
    let pred = predict(b.probs(), u, t)?;
    check_len(o.n_states(), pred.len())?;
    let ou = obs_action(o, u);
    Ok(BeliefVector(reweight(&pred, |s| o.get(s, ou, y), y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity(n: usize) -> KernelMatrix {
        KernelMatrix::from_row_fn(n, 1, n, |s, _, row| row[s] = 1.0).unwrap()
    }

    #[test]
    fn two_hypotheses() {
        let o = KernelMatrix::from_parts(2, 1, 2, vec![0.8, 0.2, 0.2, 0.8]).unwrap();
        let post = bayes_update(&BeliefVector::uniform(2), 0, 0, &identity(2), &o).unwrap();
        assert_abs_diff_eq!(post.probs()[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(post.probs()[1], 0.2, epsilon = 1e-15);
        let g = predictive_observation(&[0.5, 0.5], 0, &identity(2), &o).unwrap();
        assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn uninformative_observation_returns_prediction() {
        let t = KernelMatrix::from_parts(2, 1, 2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let o = KernelMatrix::from_parts(2, 1, 3, vec![0.2, 0.5, 0.3, 0.2, 0.5, 0.3]).unwrap();
        let b = BeliefVector::new(vec![0.25, 0.75]).unwrap();
        let post = bayes_update(&b, 0, 1, &t, &o).unwrap();
        let pred = predict(b.probs(), 0, &t).unwrap();
        for (a, b) in post.probs().iter().zip(&pred) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn chain_matches_joint_enumeration() {
        let t = KernelMatrix::from_parts(
            3,
            2,
            3,
            vec![0.5, 0.5, 0.0, 0.1, 0.0, 0.9, 0.0, 0.6, 0.4, 1.0, 0.0, 0.0, 0.2, 0.3, 0.5, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let o = KernelMatrix::from_parts(3, 1, 2, vec![0.9, 0.1, 0.4, 0.6, 0.25, 0.75]).unwrap();
        let b = [0.2, 0.3, 0.5];
        for u in 0..2 {
            for y in 0..2 {
                // P(s, s', y) = b(s) T(s'|s,u) O(y|s'); posterior over s' given y
                let mut joint = [0.0; 3];
                for s in 0..3 {
                    for sp in 0..3 {
                        joint[sp] += b[s] * t.get(s, u, sp) * o.get(sp, 0, y);
                    }
                }
                let z: f64 = joint.iter().sum();
                let post = bayes_update(&BeliefVector::new(b.to_vec()).unwrap(), u, y, &t, &o).unwrap();
                for sp in 0..3 {
                    assert_abs_diff_eq!(post.probs()[sp], joint[sp] / z, epsilon = 1e-14);
                }
                assert_abs_diff_eq!(predictive_observation(&b, u, &t, &o).unwrap()[y], z, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dirac_belief_with_identity_gives_observation_row() {
        let o = KernelMatrix::from_parts(2, 1, 3, vec![0.1, 0.6, 0.3, 0.5, 0.25, 0.25]).unwrap();
        let g = predictive_observation(BeliefVector::dirac(2, 1).probs(), 0, &identity(2), &o).unwrap();
        assert_eq!(g, o.row(1, 0));
    }

    #[test]
    fn impossible_observation_is_reported() {
        let o = KernelMatrix::from_parts(2, 1, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = bayes_update(&BeliefVector::uniform(2), 0, 1, &identity(2), &o).unwrap_err();
        assert_eq!(err, BeliefError::ImpossibleObservation { observation: 1 });
    }

    #[test]
    fn predictive_matches_sampling() {
        use rand::{Rng, SeedableRng};
        let t = KernelMatrix::from_parts(2, 1, 2, vec![0.3, 0.7, 0.6, 0.4]).unwrap();
        let o = KernelMatrix::from_parts(2, 1, 3, vec![0.2, 0.5, 0.3, 0.7, 0.1, 0.2]).unwrap();
        let b = [0.4, 0.6];
        let g = predictive_observation(&b, 0, &t, &o).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let draw = |row: &[f64], u: f64| {
            let mut acc = 0.0;
            for (i, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            row.len() - 1
        };
        let n = 100_000;
        let mut freq = vec![0.0; 3];
        for _ in 0..n {
            let s = draw(&b, rng.random());
            let sp = draw(t.row(s, 0), rng.random());
            freq[draw(o.row(sp, 0), rng.random())] += 1.0 / n as f64;
        }
        assert!(crate::metrics::total_variation(&freq, &g) < 5e-3);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(BeliefVector::new(vec![0.5, 0.6]), Err(BeliefError::NotNormalized(_))));
        assert!(BeliefVector::new(vec![1.5, -0.5]).is_err());
    }
}
