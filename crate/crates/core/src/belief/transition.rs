use rayon::prelude::*;

use crate::quantization::{reznik_counts, KernelMatrix, SimplexGrid};

use super::{predict, reweight, BeliefError, Result};

/// Sparse rows `eta(j | b_i, u)` over simplex-grid indices, stored CSR with
/// row index `belief * n_actions + action`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTransition {
    n_beliefs: usize,
    n_actions: usize,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
}

/// Sorts by target and merges duplicate targets.
pub(crate) fn merge_entries(entries: &mut Vec<(u32, f64)>) {
    entries.sort_by_key(|e| e.0);
    let mut w = 0;
    for r in 0..entries.len() {
        if w > 0 && entries[w - 1].0 == entries[r].0 {
            entries[w - 1].1 += entries[r].1;
        } else {
            entries[w] = entries[r];
            w += 1;
        }
    }
    entries.truncate(w);
}

impl BeliefTransition {
    pub fn from_rows(n_beliefs: usize, n_actions: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        assert_eq!(rows.len(), n_beliefs * n_actions);
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let total = rows.iter().map(Vec::len).sum();
        let mut next = Vec::with_capacity(total);
        let mut prob = Vec::with_capacity(total);
        for row in rows {
            for (j, p) in row {
                next.push(j);
                prob.push(p);
            }
            offsets.push(next.len());
        }
        let t = Self { n_beliefs, n_actions, offsets, next, prob };
        t.validate()?;
        Ok(t)
    }

    /// Rows sum to one within `1e-8`.
    pub fn validate(&self) -> Result<()> {
        for belief in 0..self.n_beliefs {
            for action in 0..self.n_actions {
                let sum: f64 = self.row(belief, action).1.iter().sum();
                if (sum - 1.0).abs() > 1e-8 {
                    return Err(BeliefError::NonStochasticRow { belief, action, sum });
                }
            }
        }
        Ok(())
    }

    pub fn n_beliefs(&self) -> usize {
        self.n_beliefs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, belief: usize, action: usize) -> (&[u32], &[f64]) {
        let r = belief * self.n_actions + action;
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.next[a..b], &self.prob[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.next.len()
    }
}

/// `eta(. | b_i, u)` for every grid belief and action: each observation with
/// positive predictive mass sends that mass to the grid point nearest to the
/// posterior.
pub fn build_belief_transition(grid: &SimplexGrid, t: &KernelMatrix, o: &KernelMatrix) -> Result<BeliefTransition> {
    let n_actions = t.n_actions();
    let rows = (0..grid.len() * n_actions)
        .into_par_iter()
        .map(|r| {
            let (i, u) = (r / n_actions, r % n_actions);
            let pred = predict(&grid.probabilities(i), u, t)?;
            let ou = if o.n_actions() == 1 { 0 } else { u };
            let mut entries = Vec::new();
            for y in 0..o.n_cols() {
                let g: f64 = pred.iter().enumerate().map(|(s, p)| p * o.get(s, ou, y)).sum();
                if g > 0.0 {
                    let post = reweight(&pred, |s| o.get(s, ou, y), y)?;
                    let j = grid.index_of(&reznik_counts(&post, grid.denominator())).expect("grid point");
                    entries.push((j as u32, g));
                }
            }
            merge_entries(&mut entries);
            Ok(entries)
        })
        .collect::<Result<Vec<_>>>()?;
    BeliefTransition::from_rows(grid.len(), n_actions, rows)
}
