use serde::Serialize;

use super::episode::EpisodeRecord;
use super::{EvalError, Result};

const Z95: f64 = 1.959_963_984_540_054;

/// Empirical `alpha`-quantile, `inf {x : F(x) >= alpha}`, of sorted samples.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = ((alpha * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

/// Mean of the worst `ceil((1 - alpha) N)` samples.
pub fn cvar_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = (((1.0 - alpha) * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let tail = &sorted[n - k.min(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Mean with a normal-approximation 95% interval half-width.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Standard error of the mean.
pub fn std_error(samples: &[f64]) -> f64 {
    mean_ci(samples).1 / Z95
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalStats {
    pub n: usize,
    pub mean_msee: Vec<f64>,
    pub ci95: Vec<f64>,
    pub terminal_mean: f64,
    pub q95: f64,
    pub q90: f64,
    pub cvar90: f64,
    pub mean_effort: f64,
}

/// Per-step mean MSEE with intervals, and tail statistics of the terminal MSEE.
pub fn terminal_stats(records: &[EpisodeRecord]) -> Result<TerminalStats> {
    if records.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let len = records[0].steps.len();
    if records.iter().any(|r| r.steps.len() != len) {
        return Err(EvalError::RaggedRecords);
    }
    let mut mean_msee = Vec::with_capacity(len);
    let mut ci95 = Vec::with_capacity(len);
    for t in 0..len {
        let xs: Vec<f64> = records.iter().map(|r| r.steps[t].msee).collect();
        let (m, h) = mean_ci(&xs);
        mean_msee.push(m);
        ci95.push(h);
    }
    let mut terminal: Vec<f64> = records.iter().map(|r| r.terminal().msee).collect();
    terminal.sort_by(f64::total_cmp);
    let efforts: Vec<f64> = records.iter().map(|r| r.terminal().effort).collect();
    Ok(TerminalStats {
        n: records.len(),
        terminal_mean: mean_msee[len - 1],
        mean_msee,
        ci95,
        q95: quantile_sorted(&terminal, 0.95),
        q90: quantile_sorted(&terminal, 0.90),
        cvar90: cvar_sorted(&terminal, 0.90),
        mean_effort: efforts.iter().sum::<f64>() / efforts.len() as f64,
    })
}
