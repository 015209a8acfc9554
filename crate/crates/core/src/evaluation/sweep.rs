use serde::Serialize;

use crate::config::Tracking;
use crate::costs::ExplorationKind;
use crate::instance::{Instance, Skeleton};
use crate::models::{Point2, SensorConfig};
use crate::solver::{Policy, SolveOptions};

use super::episode::{run_trials, Controller, EpisodeSpec, Simulator};
use super::stats::{terminal_stats, TerminalStats};
use super::Result;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kinds: Vec<ExplorationKind>,
    pub lambdas: Vec<f64>,
    pub noise: Vec<(f64, f64)>,
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub tracking: Tracking,
    pub start: Point2,
    pub solve: SolveOptions,
    pub n_range: usize,
    pub n_bearing: usize,
    /// Also evaluate the uniform-random controller per noise setting.
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub kind: ExplorationKind,
    pub lambda: f64,
    pub iterations: usize,
    pub stats: TerminalStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub kind: ExplorationKind,
    pub lambda: f64,
    pub cvar90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub lambda: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub cvar90_shannon: f64,
    pub cvar90_rao: f64,
    /// Shannon minus Rao at each cost's best weight.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub stats: TerminalStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best: Vec<BestRow>,
    pub agreement: Vec<AgreementRow>,
    pub gaps: Vec<GapRow>,
    pub baseline: Vec<BaselineRow>,
}

/// For every noise setting, cost kind and weight: solve, run the paired
/// trials and summarise. The best weight per (noise, kind) minimises CVaR90,
/// ties going to the earlier weight in the list.
pub fn lambda_sweep(
    skeleton: &Skeleton,
    sensor: &SensorConfig,
    spec: &SweepSpec,
    mut progress: impl FnMut(&str),
) -> Result<SweepResult> {
    let mut out = SweepResult::default();
    let prior = vec![1.0 / skeleton.maps.len() as f64; skeleton.maps.len()];
    let tables: Vec<(ExplorationKind, Vec<f64>)> = spec.kinds.iter().map(|&k| (k, skeleton.exploration_table(k))).collect();
    for &(sr, sp) in &spec.noise {
        let inst = Instance::build(skeleton.clone(), sensor.with_noise(sr, sp), spec.n_range, spec.n_bearing)?;
        let ep = EpisodeSpec {
            instance: &inst,
            horizon: spec.horizon,
            tracking: spec.tracking,
            simulator: Simulator::Continuous,
            start: spec.start,
            prior: &prior,
            master_seed: spec.seed,
            keep_beliefs: false,
        };
        if spec.baseline {
            let recs = run_trials(&ep, Controller::Random, spec.trials)?;
            out.baseline.push(BaselineRow { sigma_r: sr, sigma_phi: sp, stats: terminal_stats(&recs)? });
        }
        let mut policies: Vec<(ExplorationKind, f64, Policy)> = Vec::new();
        for (kind, table) in &tables {
            let mut best: Option<BestRow> = None;
            for &lambda in &spec.lambdas {
                progress(&format!("sigma_r={sr} sigma_phi={sp} cost={} lambda={lambda}", kind.name()));
                let solved = inst.solve_with(table.clone(), *kind, lambda, &spec.solve)?;
                let recs = run_trials(&ep, Controller::Table(&solved.policy), spec.trials)?;
                let stats = terminal_stats(&recs)?;
                if best.as_ref().is_none_or(|b| stats.cvar90 < b.cvar90) {
                    best = Some(BestRow { sigma_r: sr, sigma_phi: sp, kind: *kind, lambda, cvar90: stats.cvar90 });
                }
                out.rows.push(SweepRow { sigma_r: sr, sigma_phi: sp, kind: *kind, lambda, iterations: solved.report.iterations, stats });
                policies.push((*kind, lambda, solved.policy));
            }
            out.best.extend(best);
        }
        for &lambda in &spec.lambdas {
            let find = |k: ExplorationKind| policies.iter().find(|p| p.0 == k && p.1 == lambda).map(|p| &p.2);
            if let (Some(s), Some(r)) = (find(ExplorationKind::Shannon), find(ExplorationKind::Rao)) {
                out.agreement.push(AgreementRow { sigma_r: sr, sigma_phi: sp, lambda, fraction: s.agreement(r) });
            }
        }
        let best_of = |k: ExplorationKind| out.best.iter().rev().find(|b| b.kind == k && b.sigma_r == sr && b.sigma_phi == sp);
        if let (Some(s), Some(r)) = (best_of(ExplorationKind::Shannon), best_of(ExplorationKind::Rao)) {
            out.gaps.push(GapRow { sigma_r: sr, sigma_phi: sp, cvar90_shannon: s.cvar90, cvar90_rao: r.cvar90, gap: s.cvar90 - r.cvar90 });
        }
    }
    Ok(out)
}
