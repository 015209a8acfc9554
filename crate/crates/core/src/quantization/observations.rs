use std::f64::consts::PI;

use crate::models::{wrap_angle, Observation, Point2, Reading, SensorConfig};

use super::{QuantizationError, Result};

/// One landmark's quantized reading: a range-bearing bin or the null atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObsCell {
    Bin { range: usize, arc: usize },
    Null,
}

/// Product partition of the observation space.
///
/// Per landmark there are `n_range * n_arc` bins over `[eps, r_max] x [-pi, pi)`
/// plus the null atom. Per-landmark index is `range * n_arc + arc`, null last.
/// Joint cells use mixed radix with landmark 0 least significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPartition {
    n_range: usize,
    n_arc: usize,
    n_landmarks: usize,
    eps: f64,
    r_max: f64,
}

/// Partition with `n` range bins and `n` bearing arcs per landmark.
pub fn build_observation_partition(sensor: &SensorConfig, n: usize) -> Result<ObservationPartition> {
    ObservationPartition::new(sensor, n, n)
}

impl ObservationPartition {
    pub fn new(sensor: &SensorConfig, n_range: usize, n_arc: usize) -> Result<Self> {
        sensor.validate()?;
        for k in [n_range, n_arc] {
            if k == 0 {
                return Err(QuantizationError::InvalidResolution(k));
            }
        }
        Ok(Self { n_range, n_arc, n_landmarks: sensor.n_landmarks, eps: sensor.eps, r_max: sensor.r_max })
    }

    /// Cells per landmark, null included.
    pub fn per_landmark(&self) -> usize {
        self.n_range * self.n_arc + 1
    }

    pub fn null_index(&self) -> usize {
        self.n_range * self.n_arc
    }

    pub fn len(&self) -> usize {
        self.per_landmark().pow(self.n_landmarks as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    pub fn range_edges(&self, bin: usize) -> (f64, f64) {
        let w = (self.r_max - self.eps) / self.n_range as f64;
        let hi = if bin + 1 == self.n_range { self.r_max } else { self.eps + w * (bin + 1) as f64 };
        (self.eps + w * bin as f64, hi)
    }

    pub fn arc_edges(&self, arc: usize) -> (f64, f64) {
        let w = 2.0 * PI / self.n_arc as f64;
        let hi = if arc + 1 == self.n_arc { PI } else { -PI + w * (arc + 1) as f64 };
        (-PI + w * arc as f64, hi)
    }

    pub fn cell_of_reading(&self, reading: &Reading) -> ObsCell {
        match *reading {
            Reading::Null => ObsCell::Null,
            Reading::Detected { range, bearing } => {
                let wr = (self.r_max - self.eps) / self.n_range as f64;
                let wa = 2.0 * PI / self.n_arc as f64;
                let r = (((range - self.eps) / wr).floor().max(0.0) as usize).min(self.n_range - 1);
                let a = (((wrap_angle(bearing) + PI) / wa).floor().max(0.0) as usize).min(self.n_arc - 1);
                ObsCell::Bin { range: r, arc: a }
            }
        }
    }

    pub fn cell_index(&self, cell: ObsCell) -> usize {
        match cell {
            ObsCell::Null => self.null_index(),
            ObsCell::Bin { range, arc } => range * self.n_arc + arc,
        }
    }

    pub fn cell_from_index(&self, index: usize) -> ObsCell {
        if index == self.null_index() {
            ObsCell::Null
        } else {
            ObsCell::Bin { range: index / self.n_arc, arc: index % self.n_arc }
        }
    }

    /// Joint cell index of an observation.
    pub fn locate(&self, obs: &Observation) -> usize {
        obs.readings
            .iter()
            .rev()
            .fold(0, |acc, r| acc * self.per_landmark() + self.cell_index(self.cell_of_reading(r)))
    }

    /// Per-landmark cells of a joint index.
    pub fn split(&self, mut index: usize) -> Vec<ObsCell> {
        (0..self.n_landmarks)
            .map(|_| {
                let c = index % self.per_landmark();
                index /= self.per_landmark();
                self.cell_from_index(c)
            })
            .collect()
    }

    /// Cell-centre representative reading for a joint index.
    pub fn representative(&self, index: usize) -> Observation {
        let readings = self
            .split(index)
            .into_iter()
            .map(|c| match c {
                ObsCell::Null => Reading::Null,
                ObsCell::Bin { range, arc } => {
                    let (r0, r1) = self.range_edges(range);
                    let (a0, a1) = self.arc_edges(arc);
                    Reading::Detected { range: 0.5 * (r0 + r1), bearing: 0.5 * (a0 + a1) }
                }
            })
            .collect();
        Observation { readings }
    }

    /// Per-landmark cell distribution for landmark `m` observed from `x`.
    pub fn landmark_distribution(&self, sensor: &SensorConfig, x: Point2, m: Point2) -> Vec<f64> {
        let mut out = vec![0.0; self.per_landmark()];
        let (r_star, phi_star) = SensorConfig::geometry(x, m);
        let p = sensor.detection_prob(r_star);
        if p > 0.0 {
            let range = sensor.range_law(r_star);
            let bearing = sensor.bearing_law(phi_star);
            let arcs: Vec<f64> = (0..self.n_arc)
                .map(|a| {
                    let (lo, hi) = self.arc_edges(a);
                    bearing.arc_mass(lo, hi)
                })
                .collect();
            for r in 0..self.n_range {
                let (lo, hi) = self.range_edges(r);
                let pr = p * range.mass(lo, hi);
                for (a, pa) in arcs.iter().enumerate() {
                    out[r * self.n_arc + a] = pr * pa;
                }
            }
        }
        out[self.null_index()] = 1.0 - p;
        out
    }

    /// Probability of the joint observation cell `cell` from pose `x` given
    /// landmark positions `landmarks`; landmarks are conditionally independent.
    pub fn cell_prob(&self, sensor: &SensorConfig, x: Point2, landmarks: &[Point2], cell: usize) -> f64 {
        assert_eq!(landmarks.len(), self.n_landmarks);
        self.split(cell)
            .into_iter()
            .zip(landmarks)
            .map(|(c, &m)| match c {
                ObsCell::Null => sensor.null_mass(x, m),
                ObsCell::Bin { range, arc } => {
                    let (r0, r1) = self.range_edges(range);
                    let (a0, a1) = self.arc_edges(arc);
                    sensor.detected_mass(x, m, r0, r1, a0, a1)
                }
            })
            .product()
    }

    /// Full joint cell distribution.
    pub fn distribution(&self, sensor: &SensorConfig, x: Point2, landmarks: &[Point2]) -> Vec<f64> {
        assert_eq!(landmarks.len(), self.n_landmarks);
        let mut joint = vec![1.0];
        for &m in landmarks {
            let marg = self.landmark_distribution(sensor, x, m);
            let mut next = Vec::with_capacity(joint.len() * marg.len());
            for q in &marg {
                next.extend(joint.iter().map(|p| p * q));
            }
            joint = next;
        }
        joint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sensor(n_landmarks: usize) -> SensorConfig {
        SensorConfig { eps: 0.05, r0: 0.15, r1: 0.6, r_max: 1.0, sigma_r: 0.5, sigma_phi: 0.3, n_landmarks }
    }

    #[test]
    fn one_landmark_n4_has_17_cells() {
        let p = build_observation_partition(&sensor(1), 4).unwrap();
        assert_eq!(p.len(), 17);
        assert_eq!(build_observation_partition(&sensor(2), 4).unwrap().len(), 289);
    }

    #[test]
    fn representatives_fall_in_their_cells() {
        let p = build_observation_partition(&sensor(2), 4).unwrap();
        for i in 0..p.len() {
            assert_eq!(p.locate(&p.representative(i)), i);
        }
    }

    #[test]
    fn cells_are_disjoint_and_exhaustive() {
        let p = build_observation_partition(&sensor(1), 4).unwrap();
        // every reading on a fine grid of the reading space lands in exactly one cell,
        // and each bin's edges contain it
        for i in 0..=200 {
            let r = 0.05 + 0.95 * i as f64 / 200.0;
            for j in 0..400 {
                let phi = -PI + 2.0 * PI * j as f64 / 400.0;
                let c = p.cell_of_reading(&Reading::Detected { range: r, bearing: phi });
                let ObsCell::Bin { range, arc } = c else { panic!() };
                let (r0, r1) = p.range_edges(range);
                let (a0, a1) = p.arc_edges(arc);
                assert!(r0 <= r && (r < r1 || (r == 1.0 && r1 == 1.0)));
                assert!(a0 <= phi && phi < a1);
            }
        }
        assert_eq!(p.cell_of_reading(&Reading::Null), ObsCell::Null);
    }

    #[test]
    fn distribution_matches_cell_prob_and_sums_to_one() {
        let s = sensor(2);
        let p = build_observation_partition(&s, 4).unwrap();
        let x = [0.1, -0.2];
        let lm = [[0.3, 0.2], [-0.4, 0.4]];
        let dist = p.distribution(&s, x, &lm);
        assert_abs_diff_eq!(dist.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        for (i, q) in dist.iter().enumerate() {
            assert_abs_diff_eq!(*q, p.cell_prob(&s, x, &lm, i), epsilon = 1e-14);
        }
    }

    #[test]
    fn blind_zone_is_all_null() {
        let s = sensor(1);
        let p = build_observation_partition(&s, 4).unwrap();
        let dist = p.distribution(&s, [0.0, 0.0], &[[0.01, 0.0]]);
        assert_eq!(dist[p.null_index()], 1.0);
    }
}
