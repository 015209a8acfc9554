use super::{QuantizationError, Result};

/// Default limit on the number of grid points.
pub const DEFAULT_GRID_CAP: u128 = 5_000_000;

/// The rational simplex grid `{k / M : k_i >= 0, sum k_i = M}` over `m` atoms.
///
/// Points are stored as integer count vectors in colexicographic order (last
/// coordinate most significant) unless a permuted ordering was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    m: usize,
    denominator: usize,
    counts: Vec<u16>,
    binom: Vec<u64>,
    rank_to_index: Option<Vec<u32>>,
}

fn grid_size(m: usize, denominator: usize) -> u128 {
    // C(M + m - 1, m - 1) with saturation.
    let (n, k) = ((denominator + m - 1) as u128, (m - 1) as u128);
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// All `C(M + m - 1, m - 1)` grid points, refusing grids above `cap`.
pub fn enumerate_simplex_grid(m: usize, denominator: usize) -> Result<SimplexGrid> {
    SimplexGrid::with_cap(m, denominator, DEFAULT_GRID_CAP)
}

impl SimplexGrid {
    pub fn with_cap(m: usize, denominator: usize, cap: u128) -> Result<Self> {
        if m == 0 {
            return Err(QuantizationError::InvalidResolution(m));
        }
        if denominator == 0 || denominator > u16::MAX as usize {
            return Err(QuantizationError::InvalidResolution(denominator));
        }
        let count = grid_size(m, denominator);
        if count > cap || count > u32::MAX as u128 {
            return Err(QuantizationError::GridTooLarge { atoms: m, denominator, count, cap });
        }
        let rows = denominator + m;
        let mut binom = vec![0u64; rows * m];
        for a in 0..rows {
            binom[a * m] = 1;
            for b in 1..m.min(a + 1) {
                let left = if b <= a - 1 { binom[(a - 1) * m + b] } else { 0 };
                binom[a * m + b] = binom[(a - 1) * m + b - 1].saturating_add(left);
            }
            if a < m && a > 0 {
                binom[a * m + a] = 1;
            }
        }
        let mut grid = Self { m, denominator, counts: Vec::new(), binom, rank_to_index: None };
        let n = count as usize;
        let mut counts = Vec::with_capacity(n * m);
        let mut buf = vec![0u16; m];
        for r in 0..n {
            grid.unrank_into(r, &mut buf);
            counts.extend_from_slice(&buf);
        }
        grid.counts = counts;
        Ok(grid)
    }

    fn c(&self, a: usize, b: usize) -> u64 {
        if b > a {
            0
        } else {
            self.binom[a * self.m + b]
        }
    }

    /// Number of compositions of `r` into `j` parts whose last part is below `k`.
    fn offset(&self, r: usize, j: usize, k: usize) -> u64 {
        self.c(r + j - 1, j - 1) - self.c(r - k + j - 1, j - 1)
    }

    /// Colex rank of a count vector; the caller guarantees it sums to `M`.
    pub fn rank(&self, counts: &[u16]) -> usize {
        let mut r = self.denominator;
        let mut rank = 0u64;
        for j in (2..=self.m).rev() {
            let k = counts[j - 1] as usize;
            rank += self.offset(r, j, k);
            r -= k;
        }
        rank as usize
    }

    fn unrank_into(&self, rank: usize, out: &mut [u16]) {
        let mut rank = rank as u64;
        let mut r = self.denominator;
        for j in (2..=self.m).rev() {
            let mut k = 0;
            while k < r && self.offset(r, j, k + 1) <= rank {
                k += 1;
            }
            rank -= self.offset(r, j, k);
            out[j - 1] = k as u16;
            r -= k;
        }
        out[0] = r as u16;
    }

    pub fn atoms(&self) -> usize {
        self.m
    }

    pub fn denominator(&self) -> usize {
        self.denominator
    }

    pub fn len(&self) -> usize {
        self.counts.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self, index: usize) -> &[u16] {
        &self.counts[index * self.m..(index + 1) * self.m]
    }

    pub fn probabilities(&self, index: usize) -> Vec<f64> {
        let d = self.denominator as f64;
        self.counts(index).iter().map(|&k| k as f64 / d).collect()
    }

    /// Grid index of an integer count vector, if it is a grid point.
    pub fn index_of(&self, counts: &[u16]) -> Option<usize> {
        if counts.len() != self.m || counts.iter().map(|&k| k as usize).sum::<usize>() != self.denominator {
            return None;
        }
        let rank = self.rank(counts);
        Some(match &self.rank_to_index {
            Some(t) => t[rank] as usize,
            None => rank,
        })
    }

    /// The same point set listed in another order: new index `p` holds the
    /// point previously at index `order[p]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len());
        let mut counts = Vec::with_capacity(self.counts.len());
        let mut table = vec![u32::MAX; self.len()];
        for (p, &old) in order.iter().enumerate() {
            let c = self.counts(old);
            counts.extend_from_slice(c);
            table[self.rank(c)] = p as u32;
        }
        assert!(table.iter().all(|&t| t != u32::MAX), "order must be a permutation");
        Self { counts, rank_to_index: Some(table), ..self.clone() }
    }
}

/// Nearest grid counts to `b` in Euclidean distance, in `O(m log m)`.
///
/// Rounds `M b` to nearest integers and repairs the sum by moving the entries
/// with extremal rounding residuals. Exact ties resolve to the lowest grid
/// index in colex order: decrements go to the highest tied coordinate and
/// increments to the lowest.
pub fn reznik_counts(b: &[f64], denominator: usize) -> Vec<u16> {
    let total: f64 = b.iter().sum();
    let scale = denominator as f64 / total;
    let target: Vec<f64> = b.iter().map(|p| p * scale).collect();
    let mut k: Vec<i64> = target.iter().map(|t| (t + 0.5).floor() as i64).collect();
    let excess = k.iter().sum::<i64>() - denominator as i64;
    if excess != 0 {
        let delta: Vec<f64> = k.iter().zip(&target).map(|(&ki, t)| ki as f64 - t).collect();
        let mut order: Vec<usize> = (0..b.len()).collect();
        if excess > 0 {
            order.sort_by(|&i, &j| delta[j].total_cmp(&delta[i]).then(j.cmp(&i)));
            for &i in order.iter().take(excess as usize) {
                k[i] -= 1;
            }
        } else {
            order.sort_by(|&i, &j| delta[i].total_cmp(&delta[j]).then(i.cmp(&j)));
            for &i in order.iter().take((-excess) as usize) {
                k[i] += 1;
            }
        }
    }
    k.into_iter().map(|x| x as u16).collect()
}

/// Grid index of the nearest grid point to `b`.
pub fn reznik_quantize(b: &[f64], grid: &SimplexGrid) -> Result<usize> {
    if b.len() != grid.atoms() {
        return Err(QuantizationError::DimensionMismatch { expected: grid.atoms(), got: b.len() });
    }
    let counts = reznik_counts(b, grid.denominator());
    Ok(grid.index_of(&counts).expect("rounded counts always lie on the grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(b: &[f64], grid: &SimplexGrid) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..grid.len() {
            let d: f64 = grid.probabilities(i).iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    #[test]
    fn sizes() {
        assert_eq!(enumerate_simplex_grid(3, 2).unwrap().len(), 6);
        assert_eq!(enumerate_simplex_grid(16, 5).unwrap().len(), 15_504);
        assert_eq!(enumerate_simplex_grid(16, 6).unwrap().len(), 54_264);
        assert_eq!(enumerate_simplex_grid(1, 4).unwrap().len(), 1);
    }

    #[test]
    fn colex_order_and_rank_round_trip() {
        let g = enumerate_simplex_grid(3, 2).unwrap();
        let pts: Vec<&[u16]> = (0..g.len()).map(|i| g.counts(i)).collect();
        assert_eq!(pts, vec![&[2, 0, 0][..], &[1, 1, 0], &[0, 2, 0], &[1, 0, 1], &[0, 1, 1], &[0, 0, 2]]);
        let g = enumerate_simplex_grid(5, 4).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index_of(g.counts(i)), Some(i));
            assert_eq!(g.counts(i).iter().map(|&k| k as usize).sum::<usize>(), 4);
            if i > 0 {
                let a: Vec<u16> = g.counts(i - 1).iter().rev().copied().collect();
                let b: Vec<u16> = g.counts(i).iter().rev().copied().collect();
                assert!(a < b);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = SimplexGrid::with_cap(16, 6, 1000).unwrap_err();
        assert!(matches!(err, QuantizationError::GridTooLarge { count: 54_264, .. }));
        assert!(enumerate_simplex_grid(256, 5).is_err());
    }

    #[test]
    fn permuted_lookup() {
        let g = enumerate_simplex_grid(4, 3).unwrap();
        let order: Vec<usize> = (0..g.len()).rev().collect();
        let p = g.permuted(&order);
        for i in 0..p.len() {
            assert_eq!(p.index_of(p.counts(i)), Some(i));
            assert_eq!(p.counts(i), g.counts(g.len() - 1 - i));
        }
    }

    #[test]
    fn reznik_examples() {
        let g = enumerate_simplex_grid(2, 2).unwrap();
        assert_eq!(g.counts(reznik_quantize(&[0.6, 0.4], &g).unwrap()), &[1, 1]);
        let g = enumerate_simplex_grid(4, 5).unwrap();
        for i in 0..g.len() {
            assert_eq!(reznik_quantize(&g.probabilities(i), &g).unwrap(), i);
        }
    }

    #[test]
    fn exact_ties_take_lowest_grid_index() {
        for (b, m, big_m) in [
            (vec![0.5, 0.5], 2, 1),
            (vec![0.25, 0.25, 0.5], 3, 2),
            (vec![0.125, 0.125, 0.125, 0.625], 4, 4),
            (vec![0.25, 0.25, 0.25, 0.25], 4, 2),
            (vec![0.375, 0.375, 0.25], 3, 4),
        ] {
            let g = enumerate_simplex_grid(m, big_m).unwrap();
            assert_eq!(reznik_quantize(&b, &g).unwrap(), brute_force(&b, &g), "{b:?} M={big_m}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for m in 1..=6 {
            for big_m in 1..=5 {
                let g = enumerate_simplex_grid(m, big_m).unwrap();
                for _ in 0..200 {
                    let mut b: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
                    let s: f64 = b.iter().sum();
                    b.iter_mut().for_each(|x| *x /= s);
                    assert_eq!(reznik_quantize(&b, &g).unwrap(), brute_force(&b, &g));
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let g = enumerate_simplex_grid(3, 2).unwrap();
        assert!(reznik_quantize(&[1.0], &g).is_err());
    }
}
