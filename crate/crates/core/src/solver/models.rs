use rayon::prelude::*;

use crate::belief::{BeliefTransition, KnownPoseBranches};
use crate::quantization::KernelMatrix;

use super::{FiniteMdp, Result, SolverError};

fn check_row(state: usize, action: usize, probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-8 || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(SolverError::NonStochasticRow { state, action, sum });
    }
    Ok(())
}

/// Explicit MDP with sparse transition rows indexed `state * A + action`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    costs: Vec<f64>,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
}

impl TabularMdp {
    pub fn sparse(n_states: usize, n_actions: usize, costs: Vec<f64>, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        assert_eq!(costs.len(), n_states * n_actions);
        assert_eq!(rows.len(), n_states * n_actions);
        let mut offsets = vec![0];
        let (mut next, mut prob) = (Vec::new(), Vec::new());
        for row in rows {
            for (j, p) in row {
                next.push(j);
                prob.push(p);
            }
            offsets.push(next.len());
        }
        let m = Self { n_states, n_actions, costs, offsets, next, prob };
        m.validate()?;
        Ok(m)
    }

    /// From a dense row-major `P[(s, a)][s']` table.
    pub fn dense(n_states: usize, n_actions: usize, costs: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        assert_eq!(p.len(), n_states * n_actions * n_states);
        let rows = p
            .chunks(n_states)
            .map(|r| r.iter().enumerate().filter(|(_, q)| **q != 0.0).map(|(j, q)| (j as u32, *q)).collect())
            .collect();
        Self::sparse(n_states, n_actions, costs, rows)
    }

    /// Belief MDP on a simplex grid with a per-(belief, action) cost.
    pub fn from_belief_transition(eta: &BeliefTransition, cost: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let (nb, na) = (eta.n_beliefs(), eta.n_actions());
        let costs = (0..nb * na).map(|r| cost(r / na, r % na)).collect();
        let rows = (0..nb * na)
            .map(|r| {
                let (n, p) = eta.row(r / na, r % na);
                n.iter().copied().zip(p.iter().copied()).collect()
            })
            .collect();
        Self::sparse(nb, na, costs, rows)
    }

    /// The same model with states relabelled: new state `p` is old state `order[p]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut inverse = vec![0u32; self.n_states];
        for (p, &old) in order.iter().enumerate() {
            inverse[old] = p as u32;
        }
        let na = self.n_actions;
        let mut costs = Vec::with_capacity(self.costs.len());
        let mut rows = Vec::with_capacity(self.costs.len());
        for &old in order {
            for a in 0..na {
                costs.push(self.costs[old * na + a]);
                let r = old * na + a;
                let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
                rows.push(self.next[lo..hi].iter().zip(&self.prob[lo..hi]).map(|(&j, &q)| (inverse[j as usize], q)).collect());
            }
        }
        Self::sparse(self.n_states, na, costs, rows).expect("relabelling preserves rows")
    }
}

impl FiniteMdp for TabularMdp {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn costs(&self) -> Vec<f64> {
        self.costs.clone()
    }

    fn expect(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
            *o = self.next[lo..hi].iter().zip(&self.prob[lo..hi]).map(|(&j, q)| q * v[j as usize]).sum();
        });
    }

    fn validate(&self) -> Result<()> {
        for r in 0..self.n_states * self.n_actions {
            check_row(r / self.n_actions, r % self.n_actions, &self.prob[self.offsets[r]..self.offsets[r + 1]])?;
        }
        Ok(())
    }
}

/// Planner state `(pose cell x, map-belief grid index i)`, indexed
/// `i * n_poses + x`. The pose moves by the quantized motion kernel, then the
/// map belief branches on the observation taken from the new pose.
#[derive(Debug, Clone)]
pub struct KnownPoseMdp<'a> {
    pub pose_kernel: &'a KernelMatrix,
    pub branches: &'a KnownPoseBranches,
    /// Normalised exploration cost per grid belief.
    pub exploration: Vec<f64>,
    /// `|u|^2` per action.
    pub effort: Vec<f64>,
    pub lambda: f64,
}

impl KnownPoseMdp<'_> {
    pub fn n_poses(&self) -> usize {
        self.branches.n_poses()
    }

    pub fn n_beliefs(&self) -> usize {
        self.branches.n_beliefs()
    }

    pub fn state(&self, pose: usize, belief: usize) -> usize {
        belief * self.n_poses() + pose
    }
}

impl FiniteMdp for KnownPoseMdp<'_> {
    fn n_states(&self) -> usize {
        self.n_poses() * self.n_beliefs()
    }

    fn n_actions(&self) -> usize {
        self.pose_kernel.n_actions()
    }

    fn costs(&self) -> Vec<f64> {
        let (np, na) = (self.n_poses(), self.n_actions());
        (0..self.n_states() * na)
            .map(|r| self.lambda * self.exploration[r / na / np] + self.effort[r % na])
            .collect()
    }

    fn expect(&self, v: &[f64], out: &mut [f64]) {
        let (np, na) = (self.n_poses(), self.n_actions());
        let mut w = vec![0.0; v.len()];
        self.branches.expect(v, &mut w);
        let t = self.pose_kernel;
        out.par_chunks_mut(np * na).zip(w.par_chunks(np)).for_each(|(block, wi)| {
            for x in 0..np {
                for a in 0..na {
                    block[x * na + a] = t.row(x, a).iter().zip(wi).map(|(p, q)| p * q).sum();
                }
            }
        });
    }

    fn validate(&self) -> Result<()> {
        assert_eq!(self.pose_kernel.n_states(), self.n_poses());
        assert_eq!(self.exploration.len(), self.n_beliefs());
        assert_eq!(self.effort.len(), self.n_actions());
        self.pose_kernel.validate()?;
        for i in 0..self.n_beliefs() {
            for x in 0..self.n_poses() {
                let sum: f64 = self.branches.row(i, x).1.iter().sum();
                if (sum - 1.0).abs() > 1e-8 {
                    return Err(SolverError::NonStochasticBranch { pose: x, belief: i, sum });
                }
            }
        }
        Ok(())
    }
}
