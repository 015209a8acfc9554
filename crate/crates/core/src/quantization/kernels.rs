use rayon::prelude::*;

use crate::metrics::MASS_TOLERANCE;
use crate::models::{std_normal_mass, MotionConfig, SensorConfig};

use super::lattice::{BoxLattice, FiniteSpace, MapSpace};
use super::observations::ObservationPartition;
use super::{QuantizationError, Result};

/// Row-stochastic table `K[(state, action)][column]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n_states: usize,
    n_actions: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    /// Builds the table row by row in parallel and validates it.
    pub fn from_row_fn(
        n_states: usize,
        n_actions: usize,
        n_cols: usize,
        fill: impl Fn(usize, usize, &mut [f64]) + Sync,
    ) -> Result<Self> {
        let mut data = vec![0.0; n_states * n_actions * n_cols];
        data.par_chunks_mut(n_cols.max(1)).enumerate().for_each(|(r, row)| fill(r / n_actions, r % n_actions, row));
        let k = Self { n_states, n_actions, n_cols, data };
        k.validate()?;
        Ok(k)
    }

    pub fn from_parts(n_states: usize, n_actions: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        assert_eq!(data.len(), n_states * n_actions * n_cols, "kernel data has the wrong length");
        let k = Self { n_states, n_actions, n_cols, data };
        k.validate()?;
        Ok(k)
    }

    /// Every row nonnegative, finite and summing to one within tolerance.
    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                if let Some((column, &value)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                    return Err(QuantizationError::InvalidEntry { state: s, action: a, column, value });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > MASS_TOLERANCE {
                    return Err(QuantizationError::NonStochasticRow { state: s, action: a, sum });
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_cols;
        &self.data[start..start + self.n_cols]
    }

    pub fn get(&self, state: usize, action: usize, col: usize) -> f64 {
        self.row(state, action)[col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Lifts a kernel over poses to joint `(pose, map)` states with a static
    /// map component; joint index is `pose * n_maps + map`.
    pub fn with_static_component(&self, n_maps: usize) -> Result<Self> {
        assert_eq!(self.n_states, self.n_cols, "only square kernels can be lifted");
        let n = self.n_states * n_maps;
        Self::from_row_fn(n, self.n_actions, n, |s, a, row| {
            let (pose, map) = (s / n_maps, s % n_maps);
            for (next, p) in self.row(pose, a).iter().enumerate() {
                row[next * n_maps + map] = *p;
            }
        })
    }
}

/// Cell masses along one axis of `N(mean, sigma^2)` pushed through the clamp.
/// Everything below the first interior edge lands in cell 0 and everything
/// above the last interior edge in the final cell.
fn axis_masses(edges: &[f64], mean: f64, sigma: f64) -> Vec<f64> {
    let cells = edges.len() - 1;
    let mut out = vec![0.0; cells];
    if sigma == 0.0 {
        let x = mean.clamp(edges[0], edges[cells]);
        let k = edges[1..cells].iter().take_while(|&&e| e <= x).count();
        out[k] = 1.0;
        return out;
    }
    for (k, o) in out.iter_mut().enumerate() {
        let a = if k == 0 { f64::NEG_INFINITY } else { (edges[k] - mean) / sigma };
        let b = if k + 1 == cells { f64::INFINITY } else { (edges[k + 1] - mean) / sigma };
        *o = std_normal_mass(a, b);
    }
    out
}

/// Pose kernel `S_n(j | i, u) = S(B_j | s_i, u)` on a planar lattice.
pub fn quantized_transition(motion: &MotionConfig, lattice: &BoxLattice, actions: &FiniteSpace) -> Result<KernelMatrix> {
    motion.validate()?;
    assert_eq!(lattice.dims(), 2, "pose lattice must be planar");
    for u in actions.points() {
        motion.check_control([u[0], u[1]])?;
    }
    let ex = lattice.edges(0);
    let ey = lattice.edges(1);
    let n = lattice.len();
    KernelMatrix::from_row_fn(n, actions.len(), n, |i, a, row| {
        let x = lattice.representative(i);
        let u = actions.point(a);
        let mean = motion.drift([x[0], x[1]], [u[0], u[1]]);
        let px = axis_masses(&ex, mean[0], motion.sigma_w);
        let py = axis_masses(&ey, mean[1], motion.sigma_w);
        for (jy, qy) in py.iter().enumerate() {
            for (jx, qx) in px.iter().enumerate() {
                row[lattice.join(&[jx, jy])] = qx * qy;
            }
        }
    })
}

/// Observation kernel `O_n(y | pose, map)` evaluated at pose representatives
/// and map atoms; one action column, state index `pose * |maps| + map`.
pub fn observation_kernel(
    sensor: &SensorConfig,
    poses: &BoxLattice,
    maps: &MapSpace,
    partition: &ObservationPartition,
) -> Result<KernelMatrix> {
    sensor.validate()?;
    let nm = maps.len();
    KernelMatrix::from_row_fn(poses.len() * nm, 1, partition.len(), |s, _, row| {
        let x = poses.representative(s / nm);
        let dist = partition.distribution(sensor, [x[0], x[1]], &maps.landmarks(s % nm));
        row.copy_from_slice(&dist);
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::total_variation;
    use crate::models::step_pose;
    use crate::quantization::{build_action_net, build_observation_partition, build_state_lattice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn motion(sigma_w: f64) -> MotionConfig {
        MotionConfig { half_width: 0.5, dt: 1.25, v_max: 0.2, sigma_w }
    }

    #[test]
    fn rows_are_stochastic() {
        let lat = build_state_lattice(0.5, 2, 4).unwrap();
        let net = build_action_net(0.2, 8).unwrap();
        let k = quantized_transition(&motion(0.05), &lat, &net).unwrap();
        assert_eq!((k.n_states(), k.n_actions(), k.n_cols()), (16, 7, 16));
        k.validate().unwrap();
    }

    #[test]
    fn zero_noise_is_a_dirac() {
        let lat = build_state_lattice(0.5, 2, 4).unwrap();
        let net = build_action_net(0.2, 8).unwrap();
        let k = quantized_transition(&motion(0.0), &lat, &net).unwrap();
        for i in 0..lat.len() {
            for a in 0..net.len() {
                let x = lat.representative(i);
                let u = net.point(a);
                let target = motion(0.0).project(motion(0.0).drift([x[0], x[1]], [u[0], u[1]]));
                let j = lat.locate(&target).unwrap();
                assert_eq!(k.get(i, a, j), 1.0);
            }
        }
    }

    #[test]
    fn matches_monte_carlo() {
        let m = motion(0.05);
        let lat = build_state_lattice(0.5, 2, 4).unwrap();
        let net = build_action_net(0.2, 8).unwrap();
        let k = quantized_transition(&m, &lat, &net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (i, a) in [(0, 4), (5, 1), (15, 0)] {
            let x = lat.representative(i);
            let u = net.point(a);
            let mut counts = vec![0.0; lat.len()];
            let n = 1_000_000;
            for _ in 0..n {
                let y = step_pose(&m, [x[0], x[1]], [u[0], u[1]], &mut rng).unwrap();
                counts[lat.locate(&y).unwrap()] += 1.0 / n as f64;
            }
            let tv = total_variation(&counts, k.row(i, a));
            assert!(tv < 5e-3, "cell {i} action {a}: tv {tv}");
        }
    }

    #[test]
    fn static_lift_preserves_map() {
        let lat = build_state_lattice(0.5, 2, 2).unwrap();
        let net = build_action_net(0.2, 8).unwrap();
        let k = quantized_transition(&motion(0.05), &lat, &net).unwrap();
        let j = k.with_static_component(3).unwrap();
        assert_eq!(j.n_states(), 12);
        for s in 0..12 {
            for (c, p) in j.row(s, 2).iter().enumerate() {
                if *p > 0.0 {
                    assert_eq!(c % 3, s % 3);
                }
            }
        }
    }

    #[test]
    fn observation_kernel_matches_cell_probs() {
        let s = SensorConfig { eps: 0.05, r0: 0.15, r1: 0.6, r_max: 1.0, sigma_r: 0.5, sigma_phi: 0.3, n_landmarks: 1 };
        let lat = build_state_lattice(0.5, 2, 4).unwrap();
        let maps = MapSpace::new(lat.clone(), 1);
        let part = build_observation_partition(&s, 4).unwrap();
        let o = observation_kernel(&s, &lat, &maps, &part).unwrap();
        assert_eq!(o.n_states(), 256);
        let st = 5 * 16 + 9;
        let x = lat.representative(5);
        for y in 0..part.len() {
            let expected = part.cell_prob(&s, [x[0], x[1]], &maps.landmarks(9), y);
            assert!((o.get(st, 0, y) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let err = KernelMatrix::from_parts(1, 1, 2, vec![0.5, 0.4]).unwrap_err();
        assert!(matches!(err, QuantizationError::NonStochasticRow { .. }));
        let err = KernelMatrix::from_parts(1, 1, 2, vec![1.5, -0.5]).unwrap_err();
        assert!(matches!(err, QuantizationError::InvalidEntry { .. }));
    }
}
