use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ModelError, Point2, Result};

/// Single-integrator dynamics on the square workspace `[-L, L]^2`:
/// `x' = clamp(x + u dt + w)`, `w ~ N(0, sigma_w^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Workspace half-width `L`.
    pub half_width: f64,
    /// Sampling period.
    pub dt: f64,
    /// Speed bound on controls.
    pub v_max: f64,
    /// Process-noise standard deviation per axis.
    pub sigma_w: f64,
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::InvalidMotion(msg.to_string()));
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad("half_width must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return bad("v_max must be positive");
        }
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return bad("sigma_w must be non-negative");
        }
        Ok(())
    }

    /// Component-wise clamp onto the workspace.
    pub fn project(&self, x: Point2) -> Point2 {
        let l = self.half_width;
        [x[0].clamp(-l, l), x[1].clamp(-l, l)]
    }

    pub fn contains(&self, x: Point2) -> bool {
        let l = self.half_width;
        x.iter().all(|c| (-l..=l).contains(c))
    }

    pub fn check_control(&self, u: Point2) -> Result<()> {
        if u[0].hypot(u[1]) > self.v_max * (1.0 + 1e-12) {
            return Err(ModelError::ControlOutOfBounds(u[0], u[1], self.v_max));
        }
        Ok(())
    }

    /// Noise-free mean of the next position before projection.
    pub fn drift(&self, x: Point2, u: Point2) -> Point2 {
        [x[0] + u[0] * self.dt, x[1] + u[1] * self.dt]
    }

    /// One step driven by two standard-normal draws.
    pub fn step_with(&self, x: Point2, u: Point2, noise: [f64; 2]) -> Result<Point2> {
        self.check_control(u)?;
        let m = self.drift(x, u);
        Ok(self.project([
            m[0] + self.sigma_w * noise[0],
            m[1] + self.sigma_w * noise[1],
        ]))
    }
}

/// Samples the next position. Always consumes exactly two normal draws.
pub fn step_pose<R: Rng + ?Sized>(
    cfg: &MotionConfig,
    x: Point2,
    u: Point2,
    rng: &mut R,
) -> Result<Point2> {
    let noise = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    cfg.step_with(x, u, noise)
}
