use rayon::prelude::*;

use crate::quantization::{reznik_counts, KernelMatrix, SimplexGrid};

use super::transition::merge_entries;

/// Map-belief branches when the pose is known.
///
/// Row `(i, x')` lists `(j, G(y | b_i, x'))` aggregated over observation cells
/// `y`, where `b_j` is the grid point nearest the posterior after observing
/// `y` from pose cell `x'`. Rows are stored in the order `i * n_poses + x'`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownPoseBranches {
    n_poses: usize,
    n_beliefs: usize,
    offsets: Vec<usize>,
    next: Vec<u32>,
    prob: Vec<f64>,
}

impl KnownPoseBranches {
    pub fn n_poses(&self) -> usize {
        self.n_poses
    }

    pub fn n_beliefs(&self) -> usize {
        self.n_beliefs
    }

    pub fn row(&self, belief: usize, pose: usize) -> (&[u32], &[f64]) {
        let r = belief * self.n_poses + pose;
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.next[a..b], &self.prob[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.next.len()
    }

    /// `out[i * n_poses + x'] = sum_j p * v[j * n_poses + x']`.
    pub fn expect(&self, v: &[f64], out: &mut [f64]) {
        let np = self.n_poses;
        out.par_chunks_mut(np).enumerate().for_each(|(i, w)| {
            for (x, wx) in w.iter_mut().enumerate() {
                let r = i * np + x;
                let (a, b) = (self.offsets[r], self.offsets[r + 1]);
                *wx = self.next[a..b].iter().zip(&self.prob[a..b]).map(|(&j, p)| p * v[j as usize * np + x]).sum();
            }
        });
    }

    /// Raw parts for serialization: offsets, targets, probabilities.
    pub fn parts(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.offsets, &self.next, &self.prob)
    }

    pub fn from_parts(n_poses: usize, n_beliefs: usize, offsets: Vec<usize>, next: Vec<u32>, prob: Vec<f64>) -> Option<Self> {
        let ok = offsets.len() == n_poses * n_beliefs + 1
            && offsets.first() == Some(&0)
            && offsets.last() == Some(&next.len())
            && next.len() == prob.len()
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && next.iter().all(|&j| (j as usize) < n_beliefs);
        ok.then_some(Self { n_poses, n_beliefs, offsets, next, prob })
    }
}

/// Builds the branch table from an observation kernel whose states are
/// `pose * n_maps + map` and whose single action column is the cell law.
pub fn build_known_pose_branches(grid: &SimplexGrid, obs: &KernelMatrix, n_poses: usize) -> KnownPoseBranches {
    let nm = grid.atoms();
    assert_eq!(obs.n_states(), n_poses * nm, "observation kernel does not match the grids");
    let ny = obs.n_cols();
    let denom = grid.denominator() as f64;
    let rows: Vec<Vec<(u32, f64)>> = (0..grid.len() * n_poses)
        .into_par_iter()
        .map(|r| {
            let (i, x) = (r / n_poses, r % n_poses);
            let counts = grid.counts(i);
            let mut entries = Vec::with_capacity(ny);
            let mut post = vec![0.0; nm];
            for y in 0..ny {
                let mut g = 0.0;
                for (m, p) in post.iter_mut().enumerate() {
                    *p = counts[m] as f64 / denom * obs.get(x * nm + m, 0, y);
                    g += *p;
                }
                if g > 0.0 {
                    post.iter_mut().for_each(|p| *p /= g);
                    let j = grid.index_of(&reznik_counts(&post, grid.denominator())).expect("grid point");
                    entries.push((j as u32, g));
                }
            }
            merge_entries(&mut entries);
            entries
        })
        .collect();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let mut next = Vec::new();
    let mut prob = Vec::new();
    for row in rows {
        for (j, p) in row {
            next.push(j);
            prob.push(p);
        }
        offsets.push(next.len());
    }
    KnownPoseBranches { n_poses, n_beliefs: grid.len(), offsets, next, prob }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantization::enumerate_simplex_grid;
    use approx::assert_abs_diff_eq;

    fn obs() -> KernelMatrix {
        // 2 poses x 3 maps, 2 observation cells
        KernelMatrix::from_parts(6, 1, 2, vec![0.9, 0.1, 0.5, 0.5, 0.2, 0.8, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn rows_are_distributions_and_match_direct_posteriors() {
        let grid = enumerate_simplex_grid(3, 4).unwrap();
        let o = obs();
        let br = build_known_pose_branches(&grid, &o, 2);
        for i in 0..grid.len() {
            let b = grid.probabilities(i);
            for x in 0..2 {
                let (next, prob) = br.row(i, x);
                assert_abs_diff_eq!(prob.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                let mut expected = vec![0.0; grid.len()];
                for y in 0..2 {
                    let joint: Vec<f64> = (0..3).map(|m| b[m] * o.get(x * 3 + m, 0, y)).collect();
                    let g: f64 = joint.iter().sum();
                    if g > 0.0 {
                        let post: Vec<f64> = joint.iter().map(|p| p / g).collect();
                        let brute = (0..grid.len())
                            .min_by(|&u, &v| {
                                let d = |k: usize| grid.probabilities(k).iter().zip(&post).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                                d(u).total_cmp(&d(v)).then(u.cmp(&v))
                            })
                            .unwrap();
                        expected[brute] += g;
                    }
                }
                let mut got = vec![0.0; grid.len()];
                for (j, p) in next.iter().zip(prob) {
                    got[*j as usize] += p;
                }
                for (a, b) in got.iter().zip(&expected) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn uninformative_pose_keeps_belief() {
        let grid = enumerate_simplex_grid(3, 4).unwrap();
        let br = build_known_pose_branches(&grid, &obs(), 2);
        for i in 0..grid.len() {
            assert_eq!(br.row(i, 1).0, &[i as u32]);
        }
    }

    #[test]
    fn expect_sums_branches() {
        let grid = enumerate_simplex_grid(3, 2).unwrap();
        let br = build_known_pose_branches(&grid, &obs(), 2);
        let v: Vec<f64> = (0..grid.len() * 2).map(|k| k as f64).collect();
        let mut out = vec![0.0; v.len()];
        br.expect(&v, &mut out);
        for i in 0..grid.len() {
            for x in 0..2 {
                let (n, p) = br.row(i, x);
                let e: f64 = n.iter().zip(p).map(|(j, q)| q * v[*j as usize * 2 + x]).sum();
                assert_eq!(out[i * 2 + x], e);
            }
        }
    }
}
