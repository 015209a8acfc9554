//! Assembles the quantized known-pose model from a run configuration.

use std::sync::Arc;

use rayon::prelude::*;

use crate::belief::{build_known_pose_branches, KnownPoseBranches};
use crate::config::RunConfig;
use crate::costs::{effort, CostConfig, ExplorationKind};
use crate::models::{MotionConfig, SensorConfig};
use crate::quantization::{
    build_action_net, build_state_lattice, observation_kernel, quantized_transition, BoxLattice, FiniteSpace,
    KernelMatrix, MapSpace, ObservationPartition, QuantizationError, SimplexGrid,
};
use crate::solver::{value_iteration, KnownPoseMdp, Policy, PolicyMeta, SolveOptions, SolveReport, SolverError, ValueFunction};

/// Noise-independent part of the model: lattices, nets, motion kernel, grid.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub motion: MotionConfig,
    pub poses: BoxLattice,
    pub actions: FiniteSpace,
    pub maps: MapSpace,
    pub pose_kernel: Arc<KernelMatrix>,
    pub grid: Arc<SimplexGrid>,
}

impl Skeleton {
    pub fn build(cfg: &RunConfig) -> Result<Self, QuantizationError> {
        let q = &cfg.quantization;
        let motion = cfg.motion();
        let poses = build_state_lattice(cfg.workspace.half_width, 2, q.n_pose)?;
        let actions = build_action_net(motion.v_max, q.n_action)?;
        let map_lattice = build_state_lattice(cfg.workspace.half_width, 2, q.n_map)?;
        let maps = MapSpace::new(map_lattice, cfg.sensor.n_landmarks);
        let grid = SimplexGrid::with_cap(maps.len(), q.denominator, q.grid_cap as u128)?;
        let pose_kernel = quantized_transition(&motion, &poses, &actions)?;
        Ok(Self { motion, poses, actions, maps, pose_kernel: Arc::new(pose_kernel), grid: Arc::new(grid) })
    }

    /// A skeleton on explicit lattices and map atoms.
    pub fn from_parts(
        motion: MotionConfig,
        poses: BoxLattice,
        actions: FiniteSpace,
        maps: MapSpace,
        denominator: usize,
    ) -> Result<Self, QuantizationError> {
        let grid = crate::quantization::enumerate_simplex_grid(maps.len(), denominator)?;
        let pose_kernel = quantized_transition(&motion, &poses, &actions)?;
        Ok(Self { motion, poses, actions, maps, pose_kernel: Arc::new(pose_kernel), grid: Arc::new(grid) })
    }

    /// The same lattices with another belief-grid denominator.
    pub fn with_denominator(&self, denominator: usize) -> Result<Self, QuantizationError> {
        let grid = crate::quantization::enumerate_simplex_grid(self.maps.len(), denominator)?;
        Ok(Self { grid: Arc::new(grid), ..self.clone() })
    }

    /// Normalised exploration cost of every grid belief.
    pub fn exploration_table(&self, kind: ExplorationKind) -> Vec<f64> {
        let d = self.maps.atoms().distances();
        let cfg = CostConfig::new(0.0, 0.5, kind, d).expect("valid cost parameters");
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| cfg.exploration(&self.grid.probabilities(i), d).expect("grid matches map space"))
            .collect()
    }

    pub fn effort_table(&self) -> Vec<f64> {
        self.actions.points().iter().map(|u| effort(u)).collect()
    }
}

/// A skeleton with a sensor model: observation kernel and belief branches.
#[derive(Debug, Clone)]
pub struct Instance {
    pub skeleton: Skeleton,
    pub sensor: SensorConfig,
    pub partition: ObservationPartition,
    pub obs_kernel: Arc<KernelMatrix>,
    pub branches: Arc<KnownPoseBranches>,
}

impl Instance {
    pub fn build(skeleton: Skeleton, sensor: SensorConfig, n_range: usize, n_bearing: usize) -> Result<Self, QuantizationError> {
        let partition = ObservationPartition::new(&sensor, n_range, n_bearing)?;
        let obs_kernel = observation_kernel(&sensor, &skeleton.poses, &skeleton.maps, &partition)?;
        let branches = build_known_pose_branches(&skeleton.grid, &obs_kernel, skeleton.poses.len());
        Ok(Self { skeleton, sensor, partition, obs_kernel: Arc::new(obs_kernel), branches: Arc::new(branches) })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self, QuantizationError> {
        let q = &cfg.quantization;
        Self::build(Skeleton::build(cfg)?, cfg.sensor(), q.range_bins(), q.bearing_arcs())
    }

    /// Parts loaded from a cache.
    pub fn from_cached(
        skeleton: Skeleton,
        sensor: SensorConfig,
        partition: ObservationPartition,
        obs_kernel: KernelMatrix,
        branches: KnownPoseBranches,
    ) -> Self {
        Self { skeleton, sensor, partition, obs_kernel: Arc::new(obs_kernel), branches: Arc::new(branches) }
    }

    pub fn mdp(&self, exploration: Vec<f64>, lambda: f64) -> KnownPoseMdp<'_> {
        KnownPoseMdp {
            pose_kernel: &self.skeleton.pose_kernel,
            branches: &self.branches,
            exploration,
            effort: self.skeleton.effort_table(),
            lambda,
        }
    }

    pub fn solve(&self, kind: ExplorationKind, lambda: f64, opts: &SolveOptions) -> Result<Solved, SolverError> {
        self.solve_with(self.skeleton.exploration_table(kind), kind, lambda, opts)
    }

    /// Solves with a precomputed exploration table.
    pub fn solve_with(&self, exploration: Vec<f64>, kind: ExplorationKind, lambda: f64, opts: &SolveOptions) -> Result<Solved, SolverError> {
        let mdp = self.mdp(exploration, lambda);
        let (values, actions, report) = value_iteration(&mdp, opts)?;
        let sk = &self.skeleton;
        let meta = PolicyMeta {
            n_poses: sk.poses.len(),
            n_maps: sk.maps.len(),
            denominator: sk.grid.denominator(),
            n_beliefs: sk.grid.len(),
            n_actions: sk.actions.len(),
            cost: kind.name().to_string(),
            lambda,
            beta: opts.beta,
        };
        Ok(Solved {
            value: ValueFunction { n_poses: sk.poses.len(), values },
            policy: Policy::new(meta, actions)?,
            report,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub value: ValueFunction,
    pub policy: Policy,
    pub report: SolveReport,
}

/// Landmark positions of the three-map instance.
pub const THREE_MAPS: [[f64; 2]; 3] = [[-0.375, 0.375], [0.375, 0.375], [0.375, -0.375]];

/// The configured pose lattice and action net with three single-landmark
/// map hypotheses placed at three corners of the map lattice.
pub fn three_map_skeleton(cfg: &RunConfig, denominator: usize) -> Result<Skeleton, QuantizationError> {
    let q = &cfg.quantization;
    let motion = cfg.motion();
    let poses = build_state_lattice(cfg.workspace.half_width, 2, q.n_pose)?;
    let actions = build_action_net(motion.v_max, q.n_action)?;
    let scale = cfg.workspace.half_width / 0.5;
    let atoms = THREE_MAPS.iter().map(|p| vec![p[0] * scale, p[1] * scale]).collect();
    let maps = MapSpace::from_atoms(build_state_lattice(cfg.workspace.half_width, 2, q.n_map)?, 1, atoms);
    Skeleton::from_parts(motion, poses, actions, maps, denominator)
}
