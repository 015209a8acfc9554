use activeslam_core::belief::{build_belief_transition, BeliefTransition};
use activeslam_core::config::{RunConfig, Tracking};
use activeslam_core::costs::{information_gain, shannon_entropy};
use activeslam_core::evaluation::{run_trials, Controller, EpisodeSpec, Simulator};
use activeslam_core::instance::{three_map_skeleton, Instance};
use activeslam_core::quantization::{enumerate_simplex_grid, KernelMatrix, SimplexGrid};

fn tiny() -> (KernelMatrix, KernelMatrix) {
    let t = KernelMatrix::from_parts(
        3,
        2,
        3,
        vec![0.7, 0.2, 0.1, 0.0, 1.0, 0.0, 0.1, 0.8, 0.1, 0.0, 0.5, 0.5, 0.3, 0.3, 0.4, 0.5, 0.0, 0.5],
    )
    .unwrap();
    let o = KernelMatrix::from_parts(3, 2, 3, vec![
        0.8, 0.1, 0.1, 0.34, 0.33, 0.33, //
        0.1, 0.8, 0.1, 0.33, 0.34, 0.33, //
        0.1, 0.1, 0.8, 0.33, 0.33, 0.34,
    ])
    .unwrap();
    (t, o)
}

fn entropy(grid: &SimplexGrid, i: usize) -> f64 {
    shannon_entropy(&grid.probabilities(i))
}

fn expected_entropy(eta: &BeliefTransition, grid: &SimplexGrid, i: usize, u: usize) -> f64 {
    let (n, p) = eta.row(i, u);
    n.iter().zip(p).map(|(j, q)| q * entropy(grid, *j as usize)).sum()
}

#[test]
fn two_step_information_gain_matches_entropy_cost() {
    let (t, o) = tiny();
    let grid = enumerate_simplex_grid(3, 4).unwrap();
    let eta = build_belief_transition(&grid, &t, &o).unwrap();
    let beta: f64 = 0.9;
    for i0 in 0..grid.len() {
        let b0 = grid.probabilities(i0);
        let mut gains = Vec::new();
        let mut costs = Vec::new();
        for u0 in 0..2 {
            let (next, prob) = eta.row(i0, u0);
            // every assignment of a second action to each reachable belief
            for mask in 0..(1usize << next.len()) {
                let u1 = |k: usize| (mask >> k) & 1;
                let mut gain = information_gain(&b0, next, prob, &grid);
                let mut cost = 0.0;
                for (k, (&j, &p)) in next.iter().zip(prob).enumerate() {
                    let (n2, p2) = eta.row(j as usize, u1(k));
                    gain += beta * p * information_gain(&grid.probabilities(j as usize), n2, p2, &grid);
                    cost += p * ((1.0 - beta) * entropy(&grid, j as usize) + beta * expected_entropy(&eta, &grid, j as usize, u1(k)));
                }
                gains.push(gain);
                costs.push(cost);
            }
        }
        let h0 = shannon_entropy(&b0);
        for (g, c) in gains.iter().zip(&costs) {
            assert!((g - (h0 - c)).abs() < 1e-12);
        }
        let best_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let argmax: Vec<usize> = (0..gains.len()).filter(|&k| gains[k] >= best_gain - 1e-12).collect();
        let argmin: Vec<usize> = (0..costs.len()).filter(|&k| costs[k] <= best_cost + 1e-12).collect();
        assert_eq!(argmax, argmin, "initial belief {i0}");
    }
}

#[test]
fn posterior_concentrates_on_the_true_map() {
    let cfg = RunConfig::default();
    let sensor = cfg.sensor().with_noise(0.05, 0.05);
    let inst = Instance::build(three_map_skeleton(&cfg, 4).unwrap(), sensor, 4, 4).unwrap();
    let prior = vec![1.0 / 3.0; 3];
    let spec = EpisodeSpec {
        instance: &inst,
        horizon: 20,
        tracking: Tracking::Exact,
        simulator: Simulator::Quantized,
        start: cfg.motion.start,
        prior: &prior,
        master_seed: 99,
        keep_beliefs: true,
    };
    let recs = run_trials(&spec, Controller::Random, 200).unwrap();
    let mass_at = |t: usize| recs.iter().map(|r| r.beliefs[t][r.true_map]).sum::<f64>() / recs.len() as f64;
    let trend: Vec<f64> = [0, 2, 5, 10, 20].iter().map(|&t| mass_at(t)).collect();
    assert!(trend.windows(2).all(|w| w[1] >= w[0]), "{trend:?}");
    assert!(trend[4] > 0.9, "{trend:?}");
}
