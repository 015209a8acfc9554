use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dist::{TruncatedNormal, WrappedNormal};
use super::{ModelError, Point2, Result};

/// `h(z) = 3z^2 - 2z^3`, clamped to `[0, 1]` outside the unit interval.
pub fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

/// Smooth ramp from 0 (at `r <= a`) to 1 (at `r >= b`).
pub fn ramp(a: f64, b: f64, r: f64) -> f64 {
    if r <= a {
        0.0
    } else if r >= b {
        1.0
    } else {
        smoothstep((r - a) / (b - a))
    }
}

/// Range-bearing sensor with missed detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Minimum range; nothing closer is ever detected.
    pub eps: f64,
    /// Start of the full-detection band.
    pub r0: f64,
    /// End of the full-detection band.
    pub r1: f64,
    /// Sensing horizon.
    pub r_max: f64,
    pub sigma_r: f64,
    /// Bearing noise in radians.
    pub sigma_phi: f64,
    pub n_landmarks: usize,
}

/// Detection probability at true range `r` for the radii in `cfg`.
pub fn detection_prob(cfg: &SensorConfig, r: f64) -> f64 {
    ramp(cfg.eps, cfg.r0, r) * (1.0 - ramp(cfg.r1, cfg.r_max, r))
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ModelError::InvalidSensor(msg));
        if !(0.0 < self.eps && self.eps < self.r0 && self.r0 < self.r1 && self.r1 < self.r_max) {
            return bad(format!(
                "radii must satisfy 0 < eps < r0 < r1 < r_max, got {} {} {} {}",
                self.eps, self.r0, self.r1, self.r_max
            ));
        }
        if !(self.sigma_r > 0.0 && self.sigma_phi > 0.0) {
            return bad("noise standard deviations must be positive".into());
        }
        if self.n_landmarks == 0 {
            return bad("at least one landmark is required".into());
        }
        Ok(())
    }

    pub fn detection_prob(&self, r: f64) -> f64 {
        detection_prob(self, r)
    }

    pub fn with_noise(&self, sigma_r: f64, sigma_phi: f64) -> Self {
        Self { sigma_r, sigma_phi, ..*self }
    }

    /// True range and bearing from `x` to landmark `m`.
    pub fn geometry(x: Point2, m: Point2) -> (f64, f64) {
        let dx = m[0] - x[0];
        let dy = m[1] - x[1];
        (dx.hypot(dy), super::dist::wrap_angle(dy.atan2(dx)))
    }

    pub fn range_law(&self, r_star: f64) -> TruncatedNormal {
        TruncatedNormal::new(r_star, self.sigma_r, self.eps, self.r_max)
    }

    pub fn bearing_law(&self, phi_star: f64) -> WrappedNormal {
        WrappedNormal::new(phi_star, self.sigma_phi)
    }

    /// Probability that landmark `m` produces a detection inside
    /// `[r_lo, r_hi) x [phi_lo, phi_hi)` when observed from `x`.
    ///
    /// Where the detection probability vanishes the detected-reading law is
    /// immaterial and the mass is zero.
    pub fn detected_mass(&self, x: Point2, m: Point2, r_lo: f64, r_hi: f64, phi_lo: f64, phi_hi: f64) -> f64 {
        let (r_star, phi_star) = Self::geometry(x, m);
        let p = self.detection_prob(r_star);
        if p == 0.0 || r_hi <= r_lo || phi_hi <= phi_lo {
            return 0.0;
        }
        p * self.range_law(r_star).mass(r_lo, r_hi) * self.bearing_law(phi_star).arc_mass(phi_lo, phi_hi)
    }

    /// Probability that landmark `m` is missed from `x`.
    pub fn null_mass(&self, x: Point2, m: Point2) -> f64 {
        let (r_star, _) = Self::geometry(x, m);
        1.0 - self.detection_prob(r_star)
    }

    /// Deterministic observation given the per-landmark random draws.
    pub fn observe_with(&self, x: Point2, landmarks: &[Point2], draws: &[SensorDraws]) -> Result<Observation> {
        if landmarks.len() != self.n_landmarks {
            return Err(ModelError::LandmarkCount { expected: self.n_landmarks, got: landmarks.len() });
        }
        assert_eq!(draws.len(), landmarks.len(), "one draw set per landmark");
        let readings = landmarks
            .iter()
            .zip(draws)
            .map(|(&m, d)| {
                let (r_star, phi_star) = Self::geometry(x, m);
                if d.detect < self.detection_prob(r_star) {
                    Reading::Detected {
                        range: self.range_law(r_star).quantile(d.range_u),
                        bearing: self.bearing_law(phi_star).sample(d.bearing_z),
                    }
                } else {
                    Reading::Null
                }
            })
            .collect();
        Ok(Observation { readings })
    }

    /// Samples one observation; per landmark consumes one detection uniform,
    /// one range uniform and one bearing normal regardless of the outcome.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        x: Point2,
        landmarks: &[Point2],
        rng: &mut R,
    ) -> Result<Observation> {
        let draws: Vec<SensorDraws> = landmarks.iter().map(|_| SensorDraws::sample(rng)).collect();
        self.observe_with(x, landmarks, &draws)
    }
}

/// Randomness consumed by one landmark reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorDraws {
    pub detect: f64,
    pub range_u: f64,
    pub bearing_z: f64,
}

impl SensorDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            detect: rng.random(),
            range_u: rng.random(),
            bearing_z: rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Detected { range: f64, bearing: f64 },
    Null,
}

/// One reading per labelled landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub readings: Vec<Reading>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SensorConfig {
        SensorConfig { eps: 0.1, r0: 1.0, r1: 3.0, r_max: 5.0, sigma_r: 0.5, sigma_phi: 0.3, n_landmarks: 1 }
    }

    #[test]
    fn smoothstep_values() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep(-2.0), 0.0);
        assert_eq!(smoothstep(3.0), 1.0);
        let mut prev = 0.0;
        for i in 1..=100 {
            let h = smoothstep(i as f64 / 100.0);
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn detection_prob_examples() {
        let c = cfg();
        assert_eq!(c.detection_prob(2.0), 1.0);
        assert_eq!(c.detection_prob(0.05), 0.0);
        assert_abs_diff_eq!(c.detection_prob(4.0), 0.5, epsilon = 1e-15);
        assert_eq!(c.detection_prob(5.0), 0.0);
        assert_eq!(c.detection_prob(7.0), 0.0);
        assert_eq!(c.detection_prob(0.1), 0.0);
    }

    #[test]
    fn detection_prob_is_lipschitz_on_a_fine_grid() {
        // h has slope at most 3/2, so each ramp is (1.5 / width)-Lipschitz.
        let c = cfg();
        let bound = 1.5 / (c.r0 - c.eps) + 1.5 / (c.r_max - c.r1);
        let h = 1e-4;
        let mut r = 0.0;
        while r < 6.0 {
            let diff = (c.detection_prob(r + h) - c.detection_prob(r)).abs();
            assert!(diff <= bound * h * (1.0 + 1e-9), "jump {diff} at r = {r}");
            r += h;
        }
    }

    #[test]
    fn validation_rejects_unordered_radii() {
        assert!(cfg().validate().is_ok());
        assert!(SensorConfig { r0: 4.0, ..cfg() }.validate().is_err());
        assert!(SensorConfig { sigma_phi: 0.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn blind_zone_is_always_null() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let y = c.sample_observation([0.0, 0.0], &[[0.05, 0.0]], &mut rng).unwrap();
            assert_eq!(y.readings[0], Reading::Null);
        }
    }

    #[test]
    fn central_band_always_detects() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let y = c.sample_observation([0.0, 0.0], &[[0.0, 2.0]], &mut rng).unwrap();
            match y.readings[0] {
                Reading::Detected { range, bearing } => {
                    assert!((c.eps..=c.r_max).contains(&range));
                    assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&bearing));
                }
                Reading::Null => panic!("missed a landmark inside the full-detection band"),
            }
        }
    }

    #[test]
    fn detection_frequency_at_half_probability() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| {
                let y = c.sample_observation([0.0, 0.0], &[[4.0, 0.0]], &mut rng).unwrap();
                matches!(y.readings[0], Reading::Detected { .. })
            })
            .count();
        let freq = hits as f64 / n as f64;
        let sigma = (0.25f64 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sigma, "frequency {freq}");
    }

    #[test]
    fn wrong_landmark_count_is_rejected() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(c.sample_observation([0.0, 0.0], &[[1.0, 0.0], [2.0, 0.0]], &mut rng).is_err());
    }
}
