use crate::metrics::{DistanceMatrix, ProductMetric};

use super::{QuantizationError, Result};

/// Indexed point set with its pairwise-distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    points: Vec<Vec<f64>>,
    distances: DistanceMatrix,
}

impl FiniteSpace {
    pub fn euclidean(points: Vec<Vec<f64>>) -> Self {
        let distances = DistanceMatrix::euclidean(&points);
        Self { points, distances }
    }

    pub fn with_distances(points: Vec<Vec<f64>>, distances: DistanceMatrix) -> Self {
        assert_eq!(points.len(), distances.len());
        Self { points, distances }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    /// Index of the nearest point (lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points.iter().enumerate() {
            let d = crate::metrics::euclidean(p, x);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Joint space `X x M` under the product metric; index is `pose * |M| + map`.
    pub fn product(poses: &FiniteSpace, maps: &FiniteSpace, metric: ProductMetric) -> Self {
        let nm = maps.len();
        let n = poses.len() * nm;
        let points = (0..n)
            .map(|s| {
                let mut v = poses.point(s / nm).to_vec();
                v.extend_from_slice(maps.point(s % nm));
                v
            })
            .collect();
        let distances = DistanceMatrix::from_fn(n, |a, b| {
            metric.combine(
                poses.distances().get(a / nm, b / nm),
                maps.distances().get(a % nm, b % nm),
            )
        });
        Self { points, distances }
    }
}

/// Uniform axis-aligned grid of boxes over `[lo, hi]`; representatives at box centres.
///
/// Cell index is row-major with the first axis varying fastest. Interior edges
/// belong to the upper cell; the upper boundary belongs to the last cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLattice {
    lo: Vec<f64>,
    hi: Vec<f64>,
    per_dim: usize,
}

impl BoxLattice {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, per_dim: usize) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(per_dim >= 1);
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));
        Self { lo, hi, per_dim }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn per_dim(&self) -> usize {
        self.per_dim
    }

    pub fn len(&self) -> usize {
        self.per_dim.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn width(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.per_dim as f64
    }

    /// Edges along axis `k`; the last edge is exactly `hi[k]`.
    pub fn edges(&self, k: usize) -> Vec<f64> {
        let w = self.width(k);
        (0..=self.per_dim)
            .map(|i| if i == self.per_dim { self.hi[k] } else { self.lo[k] + w * i as f64 })
            .collect()
    }

    fn axis_index(&self, k: usize, x: f64) -> usize {
        let i = ((x - self.lo[k]) / self.width(k)).floor();
        (i.max(0.0) as usize).min(self.per_dim - 1)
    }

    fn split(&self, mut index: usize) -> Vec<usize> {
        (0..self.dims())
            .map(|_| {
                let i = index % self.per_dim;
                index /= self.per_dim;
                i
            })
            .collect()
    }

    pub fn join(&self, axes: &[usize]) -> usize {
        axes.iter().rev().fold(0, |acc, &i| acc * self.per_dim + i)
    }

    /// Cell containing `x`, or `None` outside the lattice extent.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dims() {
            return None;
        }
        let mut axes = Vec::with_capacity(self.dims());
        for (k, &c) in x.iter().enumerate() {
            if !(self.lo[k]..=self.hi[k]).contains(&c) {
                return None;
            }
            axes.push(self.axis_index(k, c));
        }
        Some(self.join(&axes))
    }

    pub fn axis_indices(&self, index: usize) -> Vec<usize> {
        self.split(index)
    }

    pub fn representative(&self, index: usize) -> Vec<f64> {
        self.split(index)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lo[k] + self.width(k) * (i as f64 + 0.5))
            .collect()
    }

    /// `(lower, upper)` corners of cell `index`.
    pub fn cell_bounds(&self, index: usize) -> (Vec<f64>, Vec<f64>) {
        let axes = self.split(index);
        let lo = axes.iter().enumerate().map(|(k, &i)| self.lo[k] + self.width(k) * i as f64).collect();
        let hi = axes
            .iter()
            .enumerate()
            .map(|(k, &i)| if i + 1 == self.per_dim { self.hi[k] } else { self.lo[k] + self.width(k) * (i + 1) as f64 })
            .collect();
        (lo, hi)
    }

    /// Largest distance from a point to its representative, in units where
    /// the longest side of the lattice extent is one.
    pub fn normalized_radius(&self) -> f64 {
        let extent = (0..self.dims()).map(|k| self.hi[k] - self.lo[k]).fold(0.0, f64::max);
        let half_diag = (0..self.dims()).map(|k| (0.5 * self.width(k)).powi(2)).sum::<f64>().sqrt();
        half_diag / extent
    }

    pub fn space(&self) -> FiniteSpace {
        FiniteSpace::euclidean((0..self.len()).map(|i| self.representative(i)).collect())
    }
}

/// Lattice on `[-L, L]^dims` whose quantization radius is below `1/n` once the
/// workspace is scaled to the unit cube. Uses `n` cells per axis whenever that
/// suffices (always for `dims <= 3`).
pub fn build_state_lattice(half_width: f64, dims: usize, n: usize) -> Result<BoxLattice> {
    if n == 0 {
        return Err(QuantizationError::InvalidResolution(n));
    }
    let needed = (n as f64 * (dims as f64).sqrt() / 2.0).floor() as usize + 1;
    let per_dim = n.max(needed);
    Ok(BoxLattice::new(vec![-half_width; dims], vec![half_width; dims], per_dim))
}

/// Landmark maps whose landmarks sit on a planar lattice.
///
/// Atom index is mixed-radix over landmarks, landmark 0 least significant;
/// atom coordinates are the flattened landmark positions.
#[derive(Debug, Clone)]
pub struct MapSpace {
    lattice: BoxLattice,
    n_landmarks: usize,
    atoms: FiniteSpace,
}

impl MapSpace {
    pub fn new(lattice: BoxLattice, n_landmarks: usize) -> Self {
        let k = lattice.len();
        let n = k.pow(n_landmarks as u32);
        let points = (0..n)
            .map(|mut a| {
                let mut coords = Vec::with_capacity(2 * n_landmarks);
                for _ in 0..n_landmarks {
                    coords.extend(lattice.representative(a % k));
                    a /= k;
                }
                coords
            })
            .collect();
        Self { lattice, n_landmarks, atoms: FiniteSpace::euclidean(points) }
    }

    /// Maps whose atoms are an explicit list of landmark configurations.
    pub fn from_atoms(lattice: BoxLattice, n_landmarks: usize, atoms: Vec<Vec<f64>>) -> Self {
        assert!(atoms.iter().all(|a| a.len() == 2 * n_landmarks));
        Self { lattice, n_landmarks, atoms: FiniteSpace::euclidean(atoms) }
    }

    pub fn lattice(&self) -> &BoxLattice {
        &self.lattice
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    pub fn atoms(&self) -> &FiniteSpace {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn landmarks(&self, atom: usize) -> Vec<[f64; 2]> {
        self.atoms.point(atom).chunks(2).map(|c| [c[0], c[1]]).collect()
    }
}
