use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::belief::reweight;
use crate::config::Tracking;
use crate::instance::Instance;
use crate::models::{Point2, SensorDraws};
use crate::quantization::{reznik_counts, reznik_quantize};
use crate::solver::Policy;

use super::rng::{stream, trial_seed, Purpose};
use super::{EvalError, Result};

/// Chooses actions during an episode.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// Tabulated policy, extended to off-grid beliefs through the nearest grid point.
    Table(&'a Policy),
    /// Uniform action from the trial's policy stream.
    Random,
    /// Always the same action.
    Constant(usize),
}

/// Which world the episode runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simulator {
    /// Continuous pose and readings from the motion and sensor models.
    Continuous,
    /// Pose cell and observation cell drawn from the quantized kernels.
    Quantized,
}

#[derive(Debug, Clone)]
pub struct EpisodeSpec<'a> {
    pub instance: &'a Instance,
    pub horizon: usize,
    pub tracking: Tracking,
    pub simulator: Simulator,
    pub start: Point2,
    pub prior: &'a [f64],
    pub master_seed: u64,
    /// Keep the belief at every step in the record.
    pub keep_beliefs: bool,
}

/// State of the episode at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub pose: Point2,
    pub pose_cell: usize,
    /// Nearest grid point to the belief.
    pub belief_index: usize,
    /// Observation cell that produced this belief (none at `t = 0`).
    pub observation: Option<usize>,
    /// Action taken at `t` (none at the horizon).
    pub action: Option<usize>,
    /// `|m* - E_b[m]|^2`.
    pub msee: f64,
    /// `sum_{k < t} |u_k|^2`.
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trial: usize,
    pub seed: u64,
    pub true_map: usize,
    pub steps: Vec<StepRecord>,
    /// Updates skipped because the observed cell had zero likelihood.
    pub skipped_updates: usize,
    /// Hash of every process-noise and detection draw, in order.
    pub noise_digest: [u8; 32],
    pub beliefs: Vec<Vec<f64>>,
}

impl EpisodeRecord {
    pub fn terminal(&self) -> &StepRecord {
        self.steps.last().expect("episodes have at least one step")
    }
}

/// Index drawn from `row` by inverting its CDF at `u`.
pub(crate) fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in row.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn msee(b: &[f64], instance: &Instance, true_map: usize) -> f64 {
    let atoms = instance.skeleton.maps.atoms();
    let truth = atoms.point(true_map);
    let mut mean = vec![0.0; truth.len()];
    for (p, x) in b.iter().zip(atoms.points()) {
        for (m, c) in mean.iter_mut().zip(x) {
            *m += p * c;
        }
    }
    truth.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Runs one closed-loop episode of `horizon` steps for `trial`.
///
/// Per step the process stream yields two normals (continuous) or one
/// uniform (quantized); the detection stream yields one uniform per
/// landmark (continuous) or one uniform (quantized); range and bearing
/// streams yield one draw per landmark. These counts do not depend on the
/// controller, which keeps trials paired across policies.
pub fn simulate_episode(spec: &EpisodeSpec<'_>, controller: Controller<'_>, trial: usize, true_map: usize) -> Result<EpisodeRecord> {
    let inst = spec.instance;
    let sk = &inst.skeleton;
    let nm = sk.maps.len();
    if spec.prior.len() != nm {
        return Err(EvalError::PriorMismatch { expected: nm, got: spec.prior.len() });
    }
    if true_map >= nm {
        return Err(EvalError::MapOutOfRange(true_map));
    }
    if let Controller::Table(p) = controller {
        p.check_grids(&sk.poses, &sk.grid)?;
    }
    let t_seed = trial as u64;
    let mut process = stream(spec.master_seed, t_seed, Purpose::Process);
    let mut detection = stream(spec.master_seed, t_seed, Purpose::Detection);
    let mut range = stream(spec.master_seed, t_seed, Purpose::Range);
    let mut bearing = stream(spec.master_seed, t_seed, Purpose::Bearing);
    let mut policy_rng = stream(spec.master_seed, t_seed, Purpose::Policy);
    let mut digest = Sha256::new();
    let landmarks = sk.maps.landmarks(true_map);

    let mut pose = sk.motion.project(spec.start);
    let mut cell = sk.poses.locate(&pose).ok_or(EvalError::Model(crate::models::ModelError::OutsideWorkspace(pose[0], pose[1])))?;
    if spec.simulator == Simulator::Quantized {
        let r = sk.poses.representative(cell);
        pose = [r[0], r[1]];
    }
    let mut b = spec.prior.to_vec();
    if spec.tracking == Tracking::Quantized {
        b = to_grid(&b, inst);
    }
    let mut steps = Vec::with_capacity(spec.horizon + 1);
    let mut beliefs = Vec::new();
    let mut effort = 0.0;
    let mut observation = None;
    let mut skipped = 0;
    for t in 0..=spec.horizon {
        let belief_index = reznik_quantize(&b, &sk.grid)?;
        let action = if t < spec.horizon {
            Some(match controller {
                Controller::Table(p) => p.action(cell, belief_index),
                Controller::Random => policy_rng.random_range(0..sk.actions.len()),
                Controller::Constant(a) => a,
            })
        } else {
            None
        };
        steps.push(StepRecord { t, pose, pose_cell: cell, belief_index, observation, action, msee: msee(&b, inst, true_map), effort });
        if spec.keep_beliefs {
            beliefs.push(b.clone());
        }
        let Some(a) = action else { break };
        let u = sk.actions.point(a);
        effort += u[0] * u[0] + u[1] * u[1];
        let y = match spec.simulator {
            Simulator::Continuous => {
                let noise: [f64; 2] = [process.sample(StandardNormal), process.sample(StandardNormal)];
                digest.update(noise[0].to_le_bytes());
                digest.update(noise[1].to_le_bytes());
                pose = sk.motion.step_with(pose, [u[0], u[1]], noise)?;
                cell = sk.poses.locate(&pose).expect("projected pose lies in the lattice");
                let draws: Vec<SensorDraws> = landmarks
                    .iter()
                    .map(|_| SensorDraws { detect: detection.random(), range_u: range.random(), bearing_z: bearing.sample(StandardNormal) })
                    .collect();
                for d in &draws {
                    digest.update(d.detect.to_le_bytes());
                }
                let obs = inst.sensor.observe_with(pose, &landmarks, &draws)?;
                inst.partition.locate(&obs)
            }
            Simulator::Quantized => {
                let u_pose: f64 = process.random();
                let u_obs: f64 = detection.random();
                digest.update(u_pose.to_le_bytes());
                digest.update(u_obs.to_le_bytes());
                cell = sample_index(sk.pose_kernel.row(cell, a), u_pose);
                let r = sk.poses.representative(cell);
                pose = [r[0], r[1]];
                sample_index(inst.obs_kernel.row(cell * nm + true_map, 0), u_obs)
            }
        };
        observation = Some(y);
        match reweight(&b, |m| inst.obs_kernel.get(cell * nm + m, 0, y), y) {
            Ok(post) => b = post,
            Err(_) => skipped += 1,
        }
        if spec.tracking == Tracking::Quantized {
            b = to_grid(&b, inst);
        }
    }
    Ok(EpisodeRecord {
        trial,
        seed: trial_seed(spec.master_seed, t_seed),
        true_map,
        steps,
        skipped_updates: skipped,
        noise_digest: digest.finalize().into(),
        beliefs,
    })
}

fn to_grid(b: &[f64], inst: &Instance) -> Vec<f64> {
    let d = inst.skeleton.grid.denominator() as f64;
    reznik_counts(b, inst.skeleton.grid.denominator()).iter().map(|&k| k as f64 / d).collect()
}

/// `N` paired trials; trial `k` uses true map `k mod m`.
pub fn run_trials(spec: &EpisodeSpec<'_>, controller: Controller<'_>, n: usize) -> Result<Vec<EpisodeRecord>> {
    use rayon::prelude::*;
    let nm = spec.instance.skeleton.maps.len();
    (0..n).into_par_iter().map(|k| simulate_episode(spec, controller, k, k % nm)).collect()
}
