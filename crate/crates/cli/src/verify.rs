//! Oracle checks shared by the `verify` subcommand and the acceptance suite.

use std::time::Instant;

use activeslam_core::config::RunConfig;
use activeslam_core::costs::{CostConfig, ExplorationKind};
use activeslam_core::evaluation::{discounted_costs, mean_ci, cost_equivalence_check, std_error, Controller};
use activeslam_core::instance::{three_map_skeleton, Instance};
use activeslam_core::metrics::{euclidean, total_variation, transport_cost, wasserstein1, DistanceMatrix};
use activeslam_core::quantization::{
    build_state_lattice, enumerate_simplex_grid, quantization_error_bound, reznik_quantize, KernelMatrix,
};
use activeslam_core::solver::SolveOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    if m > 1 && rng.random_bool(0.3) {
        b[rng.random_range(0..m)] = 0.0;
    }
    let s: f64 = b.iter().sum();
    if s == 0.0 {
        return vec![1.0 / m as f64; m];
    }
    b.iter().map(|x| x / s).collect()
}

/// Belief-grid sizes for 16 map atoms at denominators 5 and 6, and the
/// two-atom, denominator-one grid.
pub fn grid_cardinality() -> Check {
    let t = Instant::now();
    let sizes: Vec<usize> = [(16, 5), (16, 6), (2, 1)]
        .iter()
        .map(|&(m, d)| enumerate_simplex_grid(m, d).map(|g| g.len()).unwrap_or(0))
        .collect();
    let ok = sizes == [15_504, 54_264, 2];
    Check::new("belief grid cardinality", ok, format!("|B(16,5)|={} |B(16,6)|={} |B(2,1)|={} in {:.3?}", sizes[0], sizes[1], sizes[2], t.elapsed()))
}

/// Exact transport against the closed form on the line, and the
/// `W1 <= diam * TV` bound on random planar supports.
pub fn transport_oracle(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..cases {
        let k = rng.random_range(1..=8);
        let mut xs: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        let (mu, nu) = (random_simplex(&mut rng, k), random_simplex(&mut rng, k));
        let d = DistanceMatrix::from_fn(k, |i, j| (xs[i] - xs[j]).abs());
        let lp = wasserstein1(&mu, &nu, &d).expect("valid measures");
        let (mut f, mut closed) = (0.0, 0.0);
        for i in 0..k - 1 {
            f += mu[i] - nu[i];
            closed += f64::abs(f) * (xs[i + 1] - xs[i]);
        }
        worst = worst.max((lp - closed).abs());

        let pts: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let d = DistanceMatrix::euclidean(&pts);
        let w = wasserstein1(&mu, &nu, &d).expect("valid measures");
        if w > d.diameter() * total_variation(&mu, &nu) + 1e-12 {
            violations += 1;
        }
    }
    let ok = worst <= 1e-9 && violations == 0;
    Check::new("transport oracle", ok, format!("{cases} pairs, max |LP - closed form| = {worst:.2e}, {violations} bound violations"))
}

/// Nearest grid point by exhaustive squared-Euclidean search; among values
/// within `1e-12` of the minimum the lowest grid index wins.
pub fn brute_force_nearest(b: &[f64], grid: &activeslam_core::quantization::SimplexGrid) -> usize {
    let dist = |g: usize| grid.probabilities(g).iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let best = (0..grid.len()).map(dist).fold(f64::INFINITY, f64::min);
    (0..grid.len()).find(|&g| dist(g) <= best + 1e-12).expect("grid is non-empty")
}

/// Fast quantization against exhaustive search, including uniform-on-subset
/// beliefs whose nearest points tie exactly.
pub fn reznik_oracle(cases: usize, seed: u64) -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids: Vec<Vec<_>> = (1..=6).map(|m| (1..=5).map(|d| enumerate_simplex_grid(m, d).expect("small grid")).collect()).collect();
    let mut mismatches = 0;
    let mut ties = 0;
    for case in 0..cases {
        let m = rng.random_range(1..=6);
        let big_m = rng.random_range(1..=5);
        let grid = &grids[m - 1][big_m - 1];
        let b = if case % 10 == 0 {
            ties += 1;
            let k = rng.random_range(1..=m);
            let mut b = vec![0.0; m];
            for i in rand::seq::index::sample(&mut rng, m, k) {
                b[i] = 1.0 / k as f64;
            }
            b
        } else {
            random_simplex(&mut rng, m)
        };
        if reznik_quantize(&b, grid).expect("valid belief") != brute_force_nearest(&b, grid) {
            mismatches += 1;
        }
    }
    Check::new(
        "nearest-grid quantization",
        mismatches == 0,
        format!("{cases} beliefs ({ties} tie-prone), {mismatches} disagreements with exhaustive search, {:.2?}", t.elapsed()),
    )
}

/// Distance from random measures to the best grid belief on lattice
/// representatives, against `1/n + (D/M) a (m - a) / m`.
pub fn error_bound_oracle(cases: usize, seed: u64) -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [(1usize, 1usize), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (2, 2)];
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..cases {
        let (dims, n) = shapes[rng.random_range(0..shapes.len())];
        let lat = build_state_lattice(0.5, dims, n).expect("small lattice");
        let m = lat.len();
        let reps: Vec<Vec<f64>> = (0..m).map(|i| lat.representative(i)).collect();
        let diameter = DistanceMatrix::euclidean(&reps).diameter();
        let k = rng.random_range(1..=8);
        let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..dims).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let mu = random_simplex(&mut rng, k);
        let big_m = rng.random_range(1..=5);
        let grid = enumerate_simplex_grid(m, big_m).expect("small grid");
        let best = (0..grid.len())
            .map(|g| transport_cost(&mu, &grid.probabilities(g), |i, j| euclidean(&pts[i], &reps[j])).expect("balanced"))
            .fold(f64::INFINITY, f64::min);
        let bound = quantization_error_bound(n, big_m, m, diameter);
        if best > bound + 1e-12 {
            violations += 1;
        }
        tightest = tightest.min(bound - best);
    }
    Check::new(
        "quantization error bound",
        violations == 0,
        format!("{cases} measures, {violations} violations, smallest slack {tightest:.4}, {:.2?}", t.elapsed()),
    )
}

/// Settings of the three-map instance used by the equivalence and trend checks.
pub struct ThreeMapCase {
    pub beta: f64,
    pub lambda: f64,
    pub kind: ExplorationKind,
}

impl Default for ThreeMapCase {
    fn default() -> Self {
        Self { beta: 0.9, lambda: 200.0, kind: ExplorationKind::Rao }
    }
}

fn three_map_instance(cfg: &RunConfig, denominator: usize) -> Instance {
    let q = &cfg.quantization;
    let sk = three_map_skeleton(cfg, denominator).expect("three-map skeleton");
    Instance::build(sk, cfg.sensor(), q.range_bins(), q.bearing_arcs()).expect("three-map instance")
}

/// Pathwise transport cost against belief cost under the optimal policy of
/// the three-map instance at denominator 4.
pub fn equivalence_oracle(cfg: &RunConfig, case: &ThreeMapCase, n: usize, t_trunc: usize, seed: u64) -> Check {
    let t = Instant::now();
    let inst = three_map_instance(cfg, 4);
    let opts = SolveOptions { beta: case.beta, ..SolveOptions::default() };
    let solved = inst.solve(case.kind, case.lambda, &opts).expect("three-map solve");
    let prior = [1.0 / 3.0; 3];
    let c = cost_equivalence_check(&inst, Controller::Table(&solved.policy), &prior, cfg.motion.start, n, t_trunc, case.beta, seed)
        .expect("equivalence run");
    Check::new(
        "pathwise and belief costs agree",
        c.passes(),
        format!(
            "N={n} T={t_trunc}: J_pa={:.5} J_b={:.5} gap={:.5} <= {:.5} (3 se {:.5} + tail {:.5}), {:.2?}",
            c.j_pathwise,
            c.j_belief,
            c.gap(),
            c.tolerance,
            c.tolerance - c.tail_bound,
            c.tail_bound,
            t.elapsed()
        ),
    )
}

/// Monte Carlo value at the prior of the extended optimal policy for each
/// denominator, paired across denominators; non-increasing within two
/// standard errors of each paired difference.
pub fn refinement_trend(cfg: &RunConfig, case: &ThreeMapCase, denominators: &[usize], n: usize, t_trunc: usize, seed: u64) -> Check {
    let t = Instant::now();
    let prior = [1.0 / 3.0; 3];
    let opts = SolveOptions { beta: case.beta, ..SolveOptions::default() };
    let mut runs: Vec<Vec<f64>> = Vec::new();
    for &d in denominators {
        let inst = three_map_instance(cfg, d);
        let solved = inst.solve(case.kind, case.lambda, &opts).expect("three-map solve");
        let cost = CostConfig::new(case.lambda, case.beta, case.kind, inst.skeleton.maps.atoms().distances()).expect("cost");
        runs.push(
            discounted_costs(&inst, Controller::Table(&solved.policy), &cost, &prior, cfg.motion.start, n, t_trunc, seed)
                .expect("rollouts"),
        );
    }
    let mut ok = true;
    let mut parts: Vec<String> = denominators
        .iter()
        .zip(&runs)
        .map(|(d, v)| format!("M={d}: {:.3} (se {:.3})", mean_ci(v).0, std_error(v)))
        .collect();
    for w in runs.windows(2) {
        let diff: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        let (m, se) = (mean_ci(&diff).0, std_error(&diff));
        ok &= m <= 2.0 * se;
        parts.push(format!("step {m:+.3} (2 se {:.3})", 2.0 * se));
    }
    parts.push(format!("{:.2?}", t.elapsed()));
    Check::new("value non-increasing under refinement", ok, parts.join(", "))
}

/// Value iteration on `inst`: every sweep contracts by `beta` and the final
/// Bellman residual is below `1e-6`.
pub fn contraction_oracle(inst: &Instance, kind: ExplorationKind, lambda: f64, opts: &SolveOptions) -> Check {
    let t = Instant::now();
    match inst.solve(kind, lambda, opts) {
        Ok(s) => {
            let r = &s.report;
            let ok = r.converged && r.contraction_holds(opts.beta) && r.bellman_residual < 1e-6;
            Check::new(
                &format!("value iteration contraction ({})", kind.name()),
                ok,
                format!(
                    "{} states, {} sweeps, max gap ratio {:.4} <= beta {}, residual {:.2e}, {:.2?}",
                    s.value.values.len(),
                    r.iterations,
                    r.max_ratio(),
                    opts.beta,
                    r.bellman_residual,
                    t.elapsed()
                ),
            )
        }
        Err(e) => Check::new(&format!("value iteration contraction ({})", kind.name()), false, e.to_string()),
    }
}

/// Re-validates the motion and observation kernels of `inst`; with
/// `inject_fault` one observation row is scaled first.
pub fn kernel_oracle(inst: &Instance, inject_fault: bool) -> Check {
    let obs = &inst.obs_kernel;
    let mut data = obs.data().to_vec();
    if inject_fault {
        let row = obs.n_states() / 2;
        let width = obs.n_cols();
        for v in &mut data[row * width..(row + 1) * width] {
            *v *= 1.5;
        }
    }
    let checked = inst
        .skeleton
        .pose_kernel
        .validate()
        .map_err(|e| format!("motion {e}"))
        .and_then(|_| KernelMatrix::from_parts(obs.n_states(), obs.n_actions(), obs.n_cols(), data).map_err(|e| format!("observation {e}")));
    match checked {
        Ok(_) => Check::new(
            "kernel rows stochastic",
            true,
            format!(
                "{} motion rows, {} observation rows",
                inst.skeleton.pose_kernel.n_states() * inst.skeleton.pose_kernel.n_actions(),
                obs.n_states() * obs.n_actions()
            ),
        ),
        Err(e) => Check::new("kernel rows stochastic", false, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracles_pass() {
        assert!(grid_cardinality().passed);
        assert!(transport_oracle(200, 1).passed);
        assert!(reznik_oracle(500, 2).passed);
        assert!(error_bound_oracle(100, 3).passed);
    }

    #[test]
    fn injected_fault_names_the_row() {
        let cfg = RunConfig::default();
        let inst = three_map_instance(&cfg, 2);
        assert!(kernel_oracle(&inst, false).passed);
        let c = kernel_oracle(&inst, true);
        assert!(!c.passed);
        let row = inst.obs_kernel.n_states() / 2;
        assert!(c.detail.contains(&format!("state {row}, action 0")), "{}", c.detail);
        assert!(c.line().starts_with("FAIL"));
    }

    #[test]
    fn brute_force_prefers_the_lowest_index_on_ties() {
        let grid = enumerate_simplex_grid(2, 1).unwrap();
        let i = brute_force_nearest(&[0.5, 0.5], &grid);
        assert_eq!(i, 0);
        assert_eq!(reznik_quantize(&[0.5, 0.5], &grid).unwrap(), 0);
    }
}
