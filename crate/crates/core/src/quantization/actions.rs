use std::f64::consts::PI;

use super::lattice::FiniteSpace;
use super::{QuantizationError, Result};

/// Smallest ring size whose points cover the band `[r_lo, r_hi]` around radius `rho`
/// within distance `c`, or `None` if no ring size can.
fn ring_size(rho: f64, r_lo: f64, r_hi: f64, c: f64) -> Option<usize> {
    let worst = |r: f64, half_angle: f64| (r * r + rho * rho - 2.0 * r * rho * half_angle.cos()).max(0.0).sqrt();
    if (rho - r_lo).abs() > c || (r_hi - rho).abs() > c {
        return None;
    }
    (1..=100_000).find(|&n| {
        let h = PI / n as f64;
        worst(r_lo, h) <= c && worst(r_hi, h) <= c
    })
}

/// Ring layout with `k` rings: `(radius, count)` pairs, or `None` if infeasible.
fn ring_layout(v_max: f64, c: f64, k: usize) -> Option<Vec<(f64, usize)>> {
    let half_band = v_max / (2.0 * k as f64);
    if half_band > c {
        return None;
    }
    (1..=k)
        .map(|i| {
            let rho = v_max * i as f64 / k as f64;
            let hi = (rho + half_band).min(v_max);
            ring_size(rho, rho - half_band, hi, c).map(|n| (rho, n))
        })
        .collect()
}

/// A `1/n`-net of the closed disc of radius `v_max`: the zero action plus
/// concentric rings. Among ring counts that work, the one with the fewest
/// points is used.
pub fn build_action_net(v_max: f64, n: usize) -> Result<FiniteSpace> {
    if n == 0 {
        return Err(QuantizationError::InvalidResolution(n));
    }
    let c = 1.0 / n as f64;
    let mut points = vec![vec![0.0, 0.0]];
    if v_max > c {
        let k_min = (v_max / (2.0 * c)).ceil() as usize;
        let best = (k_min..k_min + 8)
            .filter_map(|k| ring_layout(v_max, c, k))
            .min_by_key(|layout| layout.iter().map(|r| r.1).sum::<usize>())
            .expect("some ring count always covers the disc");
        for (rho, count) in best {
            for j in 0..count {
                let a = 2.0 * PI * j as f64 / count as f64;
                points.push(vec![rho * a.cos(), rho * a.sin()]);
            }
        }
    }
    Ok(FiniteSpace::euclidean(points))
}

/// Largest distance from a point of the disc to the net, estimated on a
/// polar grid with `radial x angular` samples plus the boundary circle.
pub fn covering_radius_estimate(net: &FiniteSpace, v_max: f64, radial: usize, angular: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=radial {
        let r = v_max * i as f64 / radial as f64;
        for j in 0..angular {
            let a = 2.0 * PI * j as f64 / angular as f64;
            let x = [r * a.cos(), r * a.sin()];
            let d = net.points().iter().map(|p| crate::metrics::euclidean(p, &x)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}
