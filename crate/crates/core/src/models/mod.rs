//! Continuous-space motion and sensing models for a planar robot observing
//! labelled point landmarks.

mod dist;
mod motion;
mod sensor;

pub use dist::{normal_cdf, normal_quantile, wrap_angle, TruncatedNormal, WrappedNormal};
pub(crate) use dist::std_normal_mass;
pub use motion::{step_pose, MotionConfig};
pub use sensor::{
    detection_prob, ramp, smoothstep, Observation, Reading, SensorConfig, SensorDraws,
};

use thiserror::Error;

/// A point in the planar workspace.
pub type Point2 = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid motion configuration: {0}")]
    InvalidMotion(String),
    #[error("invalid sensor configuration: {0}")]
    InvalidSensor(String),
    #[error("control ({0}, {1}) exceeds the speed bound {2}")]
    ControlOutOfBounds(f64, f64, f64),
    #[error("position ({0}, {1}) lies outside the workspace")]
    OutsideWorkspace(f64, f64),
    #[error("expected {expected} landmarks, got {got}")]
    LandmarkCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, ModelError>;
