use std::io::Write;
use std::path::PathBuf;

use activeslam_core::cache::{read_policy, read_tables, write_policy, write_tables, ModelTables};
use activeslam_core::config::{LoadedConfig, RunConfig};
use activeslam_core::costs::ExplorationKind;
use activeslam_core::evaluation::{
    lambda_sweep, run_trials, terminal_stats, Controller, EpisodeRecord, EpisodeSpec, Simulator, SweepSpec, TerminalStats,
};
use activeslam_core::instance::{Instance, Skeleton};
use activeslam_core::quantization::{ObservationPartition, QuantizationError};
use activeslam_core::solver::{Policy, SolveOptions};
use anyhow::Context as _;
use serde::Serialize;

use crate::output::{num, write_csv, write_json, Stamp};
use crate::verify;
use crate::{Cli, Failure, Result};

/// Effective configuration of one invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pub stamp: Stamp,
}

macro_rules! say {
    ($log:expr, $($arg:tt)*) => {
        writeln!($log, $($arg)*).map_err(|e| Failure::Other(e.into()))?
    };
}

impl Context {
    pub fn load(cli: &Cli) -> Result<Self> {
        let mut loaded = match &cli.config {
            Some(p) => LoadedConfig::from_path(p)?,
            None => LoadedConfig::defaults(),
        };
        if let Some(seed) = cli.seed {
            loaded.config.evaluation.seed = seed;
        }
        if let Some(out) = &cli.out {
            loaded.config.output.dir = out.to_string_lossy().into_owned();
        }
        Ok(Self::new(loaded))
    }

    pub fn new(loaded: LoadedConfig) -> Self {
        let out = PathBuf::from(&loaded.config.output.dir);
        let stamp = Stamp::new(&loaded.config.hash());
        Self { loaded, out, stamp }
    }

    pub fn cfg(&self) -> &RunConfig {
        &self.loaded.config
    }

    pub fn model_hash(&self) -> String {
        let s = &self.cfg().sensor;
        self.cfg().model_hash(s.sigma_r, s.sigma_phi)
    }

    pub fn tables_path(&self) -> PathBuf {
        self.out.join("cache").join(format!("tables-{}.bin", &self.model_hash()[..16]))
    }

    pub fn policy_path(&self, kind: ExplorationKind, lambda: f64) -> PathBuf {
        self.out.join("policies").join(format!("{}-lambda{}-{}.pol", kind.name(), lambda, &self.model_hash()[..16]))
    }

    fn solve_options(&self) -> SolveOptions {
        let c = self.cfg();
        SolveOptions { beta: c.cost.beta, tol: c.solver.tol, max_iter: c.solver.max_iter }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.out.join(name);
        std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }
}

fn quantization_failure(e: QuantizationError) -> Failure {
    match e {
        QuantizationError::GridTooLarge { .. } => Failure::Cache(e.to_string()),
        other => Failure::Config(other.to_string()),
    }
}

fn skeleton(ctx: &Context) -> Result<Skeleton> {
    Skeleton::build(ctx.cfg()).map_err(quantization_failure)
}

fn instance_from_tables(ctx: &Context, sk: Skeleton, tables: ModelTables) -> Result<Instance> {
    let c = ctx.cfg();
    let sensor = c.sensor();
    let partition = ObservationPartition::new(&sensor, c.quantization.range_bins(), c.quantization.bearing_arcs())
        .map_err(quantization_failure)?;
    let expected = (sk.poses.len() * sk.maps.len(), partition.len(), sk.poses.len(), sk.grid.len());
    let found = (tables.obs_kernel.n_states(), tables.obs_kernel.n_cols(), tables.branches.n_poses(), tables.branches.n_beliefs());
    if expected != found {
        return Err(Failure::Cache(format!("cached tables have shape {found:?}, model needs {expected:?}")));
    }
    Ok(Instance::from_cached(sk, sensor, partition, tables.obs_kernel, tables.branches))
}

/// Builds the model tables, or loads them when a cache for the same model
/// settings exists.
pub fn build(ctx: &Context, log: &mut dyn Write) -> Result<Instance> {
    for line in ctx.loaded.echo().lines() {
        say!(log, "  {line}");
    }
    let sk = skeleton(ctx)?;
    say!(log, "pose cells: {}", sk.poses.len());
    say!(log, "map atoms: {}", sk.maps.len());
    say!(log, "actions: {}", sk.actions.len());
    say!(log, "belief grid points: {}", sk.grid.len());
    let path = ctx.tables_path();
    let hash = ctx.model_hash();
    if path.exists() {
        match read_tables(&path, &hash) {
            Ok(t) => {
                let inst = instance_from_tables(ctx, sk, t)?;
                say!(log, "cache hit: {}", path.display());
                return Ok(inst);
            }
            Err(e) => say!(log, "cache unusable ({e}); rebuilding"),
        }
    }
    let c = ctx.cfg();
    let inst = Instance::build(sk, c.sensor(), c.quantization.range_bins(), c.quantization.bearing_arcs()).map_err(quantization_failure)?;
    say!(log, "observation cells: {}", inst.partition.len());
    say!(log, "belief branches: {}", inst.branches.nnz());
    write_tables(&path, &hash, &ctx.stamp.tag(), &inst.obs_kernel, &inst.branches)?;
    say!(log, "wrote {}", path.display());
    Ok(inst)
}

/// The cached model; fails when `build` has not been run for these settings.
pub fn load_instance(ctx: &Context) -> Result<Instance> {
    let path = ctx.tables_path();
    if !path.exists() {
        return Err(Failure::Cache(format!("missing model tables {}; run `activeslam build` first", path.display())));
    }
    let tables = read_tables(&path, &ctx.model_hash())?;
    instance_from_tables(ctx, skeleton(ctx)?, tables)
}

pub fn solve(ctx: &Context, kind: Option<ExplorationKind>, lambda: Option<f64>, log: &mut dyn Write) -> Result<PathBuf> {
    let inst = load_instance(ctx)?;
    let kind = kind.unwrap_or(ctx.cfg().cost.kind);
    let lambda = lambda.unwrap_or(ctx.cfg().cost.lambda);
    let opts = ctx.solve_options();
    let s = inst.solve(kind, lambda, &opts).map_err(|e| Failure::Other(e.into()))?;
    let r = &s.report;
    say!(
        log,
        "{} lambda={lambda}: {} sweeps, converged={}, max gap ratio {:.4}, residual {:.2e}",
        kind.name(),
        r.iterations,
        r.converged,
        r.max_ratio(),
        r.bellman_residual
    );
    if !r.converged {
        return Err(Failure::Other(anyhow::anyhow!("value iteration did not converge in {} sweeps", opts.max_iter)));
    }
    let path = ctx.policy_path(kind, lambda);
    write_policy(&path, &ctx.model_hash(), &ctx.stamp.tag(), &s.policy, &s.value)?;
    say!(log, "wrote {}", path.display());
    Ok(path)
}

/// The stored policy for `kind` and `lambda`, checked against the model.
pub fn load_policy(ctx: &Context, inst: &Instance, kind: ExplorationKind, lambda: f64) -> Result<Policy> {
    let path = ctx.policy_path(kind, lambda);
    if !path.exists() {
        return Err(Failure::Cache(format!("missing policy {}; run `activeslam solve` first", path.display())));
    }
    let f = read_policy(&path)?;
    let mismatch = |what: String| Failure::Cache(format!("policy {} does not match the model: {what}", path.display()));
    if f.hash != ctx.model_hash() {
        return Err(mismatch("model hash differs".into()));
    }
    if f.policy.meta.cost != kind.name() || f.policy.meta.lambda != lambda {
        return Err(mismatch(format!("solved for {} lambda={}", f.policy.meta.cost, f.policy.meta.lambda)));
    }
    f.policy.check_grids(&inst.skeleton.poses, &inst.skeleton.grid).map_err(|e| mismatch(e.to_string()))?;
    if f.policy.meta.n_actions != inst.skeleton.actions.len() || f.policy.meta.n_maps != inst.skeleton.maps.len() {
        return Err(mismatch("action or map count differs".into()));
    }
    Ok(f.policy)
}

fn trial_rows(label: &str, recs: &[EpisodeRecord]) -> Vec<Vec<String>> {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    recs.iter()
        .flat_map(|r| {
            r.steps.iter().map(move |s| {
                vec![
                    label.to_string(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.true_map.to_string(),
                    s.t.to_string(),
                    num(s.pose[0]),
                    num(s.pose[1]),
                    s.pose_cell.to_string(),
                    s.belief_index.to_string(),
                    opt(s.observation),
                    opt(s.action),
                    num(s.msee),
                    num(s.effort),
                ]
            })
        })
        .collect()
}

#[derive(Serialize)]
struct EvaluationSummary<'a> {
    kind: ExplorationKind,
    lambda: f64,
    trials: usize,
    horizon: usize,
    seed: u64,
    sigma_r: f64,
    sigma_phi: f64,
    policy: &'a TerminalStats,
    random: &'a TerminalStats,
    skipped_updates_policy: usize,
    skipped_updates_random: usize,
}

pub fn evaluate(ctx: &Context, kind: Option<ExplorationKind>, lambda: Option<f64>, log: &mut dyn Write) -> Result<()> {
    let inst = load_instance(ctx)?;
    let c = ctx.cfg();
    let kind = kind.unwrap_or(c.cost.kind);
    let lambda = lambda.unwrap_or(c.cost.lambda);
    let policy = load_policy(ctx, &inst, kind, lambda)?;
    let prior = vec![1.0 / inst.skeleton.maps.len() as f64; inst.skeleton.maps.len()];
    let ev = &c.evaluation;
    let spec = EpisodeSpec {
        instance: &inst,
        horizon: ev.horizon,
        tracking: ev.tracking,
        simulator: Simulator::Continuous,
        start: c.motion.start,
        prior: &prior,
        master_seed: ev.seed,
        keep_beliefs: false,
    };
    let run = |ctrl| run_trials(&spec, ctrl, ev.trials).map_err(|e| Failure::Other(e.into()));
    let with_policy = run(Controller::Table(&policy))?;
    let random = run(Controller::Random)?;
    let stats = |r: &[EpisodeRecord]| terminal_stats(r).map_err(|e| Failure::Other(e.into()));
    let (sp, sr) = (stats(&with_policy)?, stats(&random)?);
    let dir = ctx.dir("evaluate")?;
    let label = format!("{}-lambda{lambda}", kind.name());
    let header = [
        "controller", "trial", "seed", "true_map", "t", "x", "y", "pose_cell", "belief_index", "observation", "action", "msee", "effort",
    ];
    let rows = trial_rows(&label, &with_policy).into_iter().chain(trial_rows("random", &random));
    write_csv(&dir.join("trials.csv"), &ctx.stamp, &header, rows)?;
    let summary_rows = [(&label, &sp), (&"random".to_string(), &sr)]
        .into_iter()
        .flat_map(|(l, s)| (0..s.mean_msee.len()).map(move |t| vec![l.clone(), t.to_string(), num(s.mean_msee[t]), num(s.ci95[t])]))
        .collect::<Vec<_>>();
    write_csv(&dir.join("summary.csv"), &ctx.stamp, &["controller", "t", "mean_msee", "ci95_half_width"], summary_rows)?;
    let summary = EvaluationSummary {
        kind,
        lambda,
        trials: ev.trials,
        horizon: ev.horizon,
        seed: ev.seed,
        sigma_r: c.sensor.sigma_r,
        sigma_phi: c.sensor.sigma_phi,
        policy: &sp,
        random: &sr,
        skipped_updates_policy: with_policy.iter().map(|r| r.skipped_updates).sum(),
        skipped_updates_random: random.iter().map(|r| r.skipped_updates).sum(),
    };
    write_json(&dir.join("summary.json"), &ctx.stamp, &summary)?;
    for (l, s) in [(&label, &sp), (&"random".to_string(), &sr)] {
        say!(
            log,
            "{l}: terminal MSEE {:.4} (+/- {:.4}), q95 {:.4}, CVaR90 {:.4}, effort {:.4}",
            s.terminal_mean,
            s.ci95.last().copied().unwrap_or(0.0),
            s.q95,
            s.cvar90,
            s.mean_effort
        );
    }
    say!(log, "wrote {}", dir.display());
    Ok(())
}

pub fn sweep(ctx: &Context, log: &mut dyn Write) -> Result<()> {
    let c = ctx.cfg();
    let sk = skeleton(ctx)?;
    let spec = SweepSpec {
        kinds: c.sweep.kinds.clone(),
        lambdas: c.sweep.lambdas.clone(),
        noise: c.sweep.noise_grid(),
        trials: c.evaluation.trials,
        horizon: c.evaluation.horizon,
        seed: c.evaluation.seed,
        tracking: c.evaluation.tracking,
        start: c.motion.start,
        solve: ctx.solve_options(),
        n_range: c.quantization.range_bins(),
        n_bearing: c.quantization.bearing_arcs(),
        baseline: true,
    };
    let mut progress_err = None;
    let res = lambda_sweep(&sk, &c.sensor(), &spec, |msg| {
        if let Err(e) = writeln!(log, "{msg}") {
            progress_err.get_or_insert(e);
        }
    })
    .map_err(|e| Failure::Other(e.into()))?;
    if let Some(e) = progress_err {
        return Err(Failure::Other(e.into()));
    }
    let dir = ctx.dir("sweep")?;
    let stat_cols = ["n", "terminal_mean", "terminal_ci95", "q95", "q90", "cvar90", "mean_effort"];
    let stat_vals = |s: &TerminalStats| {
        vec![
            s.n.to_string(),
            num(s.terminal_mean),
            num(s.ci95.last().copied().unwrap_or(0.0)),
            num(s.q95),
            num(s.q90),
            num(s.cvar90),
            num(s.mean_effort),
        ]
    };
    let mut head = vec!["sigma_r", "sigma_phi", "kind", "lambda", "iterations"];
    head.extend(stat_cols);
    write_csv(
        &dir.join("sweep_rows.csv"),
        &ctx.stamp,
        &head,
        res.rows.iter().map(|r| {
            let mut v = vec![num(r.sigma_r), num(r.sigma_phi), r.kind.name().to_string(), num(r.lambda), r.iterations.to_string()];
            v.extend(stat_vals(&r.stats));
            v
        }),
    )?;
    write_csv(
        &dir.join("sweep_best.csv"),
        &ctx.stamp,
        &["sigma_r", "sigma_phi", "kind", "lambda", "cvar90"],
        res.best.iter().map(|b| vec![num(b.sigma_r), num(b.sigma_phi), b.kind.name().to_string(), num(b.lambda), num(b.cvar90)]),
    )?;
    write_csv(
        &dir.join("sweep_agreement.csv"),
        &ctx.stamp,
        &["sigma_r", "sigma_phi", "lambda", "agreement"],
        res.agreement.iter().map(|a| vec![num(a.sigma_r), num(a.sigma_phi), num(a.lambda), num(a.fraction)]),
    )?;
    write_csv(
        &dir.join("sweep_gaps.csv"),
        &ctx.stamp,
        &["sigma_r", "sigma_phi", "cvar90_shannon", "cvar90_rao", "gap"],
        res.gaps.iter().map(|g| vec![num(g.sigma_r), num(g.sigma_phi), num(g.cvar90_shannon), num(g.cvar90_rao), num(g.gap)]),
    )?;
    let mut head = vec!["sigma_r", "sigma_phi"];
    head.extend(stat_cols);
    write_csv(
        &dir.join("sweep_baseline.csv"),
        &ctx.stamp,
        &head,
        res.baseline.iter().map(|b| {
            let mut v = vec![num(b.sigma_r), num(b.sigma_phi)];
            v.extend(stat_vals(&b.stats));
            v
        }),
    )?;
    write_json(&dir.join("sweep.json"), &ctx.stamp, &res)?;
    say!(log, "{} sweep rows; wrote {}", res.rows.len(), dir.display());
    Ok(())
}

pub fn verify(ctx: &Context, inject_fault: bool, quick: bool, log: &mut dyn Write) -> Result<()> {
    let scale = |full: usize, small: usize| if quick { small } else { full };
    let cfg = ctx.cfg();
    let case = verify::ThreeMapCase::default();
    let mut checks = vec![
        verify::grid_cardinality(),
        verify::transport_oracle(scale(1000, 100), 1),
        verify::reznik_oracle(scale(10_000, 1000), 2),
        verify::error_bound_oracle(scale(1000, 100), 3),
        verify::equivalence_oracle(cfg, &case, scale(5000, 1000), 40, 7),
    ];
    for c in &checks {
        say!(log, "{}", c.line());
    }
    let inst = match load_instance(ctx) {
        Ok(i) => i,
        Err(_) => build(ctx, &mut std::io::sink())?,
    };
    for c in [
        verify::kernel_oracle(&inst, inject_fault),
        verify::contraction_oracle(&inst, cfg.cost.kind, cfg.cost.lambda, &ctx.solve_options()),
    ] {
        say!(log, "{}", c.line());
        checks.push(c);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        say!(log, "all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}

