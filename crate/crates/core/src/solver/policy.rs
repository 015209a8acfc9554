use serde::{Deserialize, Serialize};

use crate::models::Point2;
use crate::quantization::{reznik_quantize, BoxLattice, SimplexGrid};

use super::{Result, SolverError};

/// Parameters a policy table was solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub n_poses: usize,
    pub n_maps: usize,
    pub denominator: usize,
    pub n_beliefs: usize,
    pub n_actions: usize,
    pub cost: String,
    pub lambda: f64,
    pub beta: f64,
}

/// Value per `(pose cell, belief index)`, stored `belief * n_poses + pose`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub n_poses: usize,
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn get(&self, pose: usize, belief: usize) -> f64 {
        self.values[belief * self.n_poses + pose]
    }
}

/// Action index per `(pose cell, belief index)`, stored like [`ValueFunction`].
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub meta: PolicyMeta,
    pub actions: Vec<u16>,
}

impl Policy {
    pub fn new(meta: PolicyMeta, actions: Vec<u16>) -> Result<Self> {
        if actions.len() != meta.n_poses * meta.n_beliefs {
            return Err(SolverError::MetadataMismatch(format!(
                "{} actions for {} states",
                actions.len(),
                meta.n_poses * meta.n_beliefs
            )));
        }
        if let Some(a) = actions.iter().find(|&&a| a as usize >= meta.n_actions) {
            return Err(SolverError::MetadataMismatch(format!("action {a} outside the net")));
        }
        Ok(Self { meta, actions })
    }

    pub fn action(&self, pose: usize, belief: usize) -> usize {
        self.actions[belief * self.meta.n_poses + pose] as usize
    }

    /// Fraction of states on which two policies choose the same action.
    pub fn agreement(&self, other: &Policy) -> f64 {
        assert_eq!(self.actions.len(), other.actions.len());
        let same = self.actions.iter().zip(&other.actions).filter(|(a, b)| a == b).count();
        same as f64 / self.actions.len() as f64
    }

    pub fn check_grids(&self, poses: &BoxLattice, grid: &SimplexGrid) -> Result<()> {
        let m = &self.meta;
        if poses.len() != m.n_poses || grid.len() != m.n_beliefs || grid.atoms() != m.n_maps || grid.denominator() != m.denominator {
            return Err(SolverError::MetadataMismatch(format!(
                "policy for {} poses x {} beliefs (m={}, M={}), grids give {} x {} (m={}, M={})",
                m.n_poses,
                m.n_beliefs,
                m.n_maps,
                m.denominator,
                poses.len(),
                grid.len(),
                grid.atoms(),
                grid.denominator()
            )));
        }
        Ok(())
    }
}

/// Action for an arbitrary pose and map belief: quantize the pose to its
/// cell and the belief to its nearest grid point, then look up the table.
pub fn extend_policy(policy: &Policy, pose: Point2, b: &[f64], poses: &BoxLattice, grid: &SimplexGrid) -> Result<usize> {
    policy.check_grids(poses, grid)?;
    let x = poses.locate(&pose).ok_or(SolverError::PoseOutside(pose[0], pose[1]))?;
    let i = reznik_quantize(b, grid)?;
    Ok(policy.action(x, i))
}
