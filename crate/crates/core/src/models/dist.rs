//! Gaussian building blocks: tail-stable CDF differences, a truncated normal
//! on an interval and a wrapped normal on the circle `[-pi, pi)`.

use std::f64::consts::{PI, SQRT_2, TAU};

use libm::erfc;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
///
/// Acklam's rational approximation followed by two Halley corrections
/// against `erfc`, which brings the result to full double precision.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return upper_quantile(1.0 - p);
    }
    -upper_quantile(p)
}

/// `z` with `P(Z > z) = q`, for `q` in `(0, 0.5]`.
fn upper_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    // lower-tail quantile of q, then negate
    let x = if q < 0.02425 {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let mut z = -x;
    for _ in 0..2 {
        // Halley step on f(z) = Q(z) - q
        let e = 0.5 * erfc(z / SQRT_2) - q;
        let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        let u = e / pdf;
        z += u / (1.0 - 0.5 * z * u);
    }
    z
}

/// `P(a <= Z <= b)` for standard normal `Z`, evaluated in whichever tail keeps
/// the subtraction well conditioned.
pub(crate) fn std_normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * erfc(-a / SQRT_2) - 0.5 * erfc(b / SQRT_2)
    }
}

/// `N(mean, sd^2)` conditioned on `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    z: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        assert!(sd > 0.0 && lo < hi, "truncated normal needs sd > 0 and lo < hi");
        let z = std_normal_mass((lo - mean) / sd, (hi - mean) / sd);
        Self { mean, sd, lo, hi, z }
    }

    /// Unnormalised mass of `[a, b]` clipped to the support.
    fn raw_mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        std_normal_mass((a - self.mean) / self.sd, (b - self.mean) / self.sd)
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= self.lo {
            0.0
        } else if r >= self.hi {
            1.0
        } else {
            (self.raw_mass(self.lo, r) / self.z).clamp(0.0, 1.0)
        }
    }

    /// Probability of `[a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// Inverse-CDF sample from a uniform draw `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let alpha = (self.lo - self.mean) / self.sd;
        let beta = (self.hi - self.mean) / self.sd;
        let z = if alpha >= 0.0 {
            // upper tail: work with survival probabilities
            let q_alpha = 0.5 * erfc(alpha / SQRT_2);
            let target = q_alpha - u * self.z;
            upper_quantile(target.clamp(f64::MIN_POSITIVE, 0.5))
        } else if beta <= 0.0 {
            let p_beta = 0.5 * erfc(-beta / SQRT_2);
            let target = p_beta - (1.0 - u) * self.z;
            normal_quantile(target.max(f64::MIN_POSITIVE))
        } else {
            let p_alpha = 0.5 * erfc(-alpha / SQRT_2);
            normal_quantile((p_alpha + u * self.z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
        };
        (self.mean + self.sd * z).clamp(self.lo, self.hi)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Normal law wrapped onto the circle `[-pi, pi)`.
#[derive(Debug, Clone, Copy)]
pub struct WrappedNormal {
    mean: f64,
    sd: f64,
    images: i32,
}

impl WrappedNormal {
    pub fn new(mean: f64, sd: f64) -> Self {
        assert!(sd > 0.0, "wrapped normal needs sd > 0");
        // Images beyond `images` sit more than 8 sd away from any arc endpoint,
        // leaving a neglected tail far below 1e-12.
        let images = 2 + (8.0 * sd / TAU).ceil() as i32;
        Self { mean: wrap_angle(mean), sd, images }
    }

    /// Probability of the arc `[a, b)` with `-pi <= a <= b <= pi`.
    pub fn arc_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        for k in -self.images..=self.images {
            let shift = TAU * k as f64;
            total += std_normal_mass(
                (a - self.mean + shift) / self.sd,
                (b - self.mean + shift) / self.sd,
            );
        }
        total
    }

    /// Sample from a standard normal draw.
    pub fn sample(&self, z: f64) -> f64 {
        wrap_angle(self.mean + self.sd * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn truncated_cdf_is_exact_at_bounds() {
        let t = TruncatedNormal::new(2.0, 0.75, 0.1, 5.0);
        assert_eq!(t.cdf(0.1), 0.0);
        assert_eq!(t.cdf(5.0), 1.0);
        assert!(t.cdf(2.0) > 0.4 && t.cdf(2.0) < 0.6);
    }

    #[test]
    fn truncated_quantile_inverts_cdf() {
        for &(mean, sd) in &[(2.0, 0.75), (0.2, 1.25), (4.9, 0.3), (-3.0, 0.5), (9.0, 0.5)] {
            let t = TruncatedNormal::new(mean, sd, 0.1, 5.0);
            for i in 1..20 {
                let u = i as f64 / 20.0;
                let r = t.quantile(u);
                assert!((0.1..=5.0).contains(&r));
                assert_abs_diff_eq!(t.cdf(r), u, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn wrapped_arcs_sum_to_one() {
        for &sd in &[0.05, 0.3, 0.5, 0.7, 1.0, 2.5] {
            for &mu in &[-3.1, -1.0, 0.0, 2.0, 3.14159] {
                let w = WrappedNormal::new(mu, sd);
                let n = 7;
                let total: f64 = (0..n)
                    .map(|k| {
                        let a = -PI + TAU * k as f64 / n as f64;
                        let b = if k + 1 == n { PI } else { -PI + TAU * (k + 1) as f64 / n as f64 };
                        w.arc_mass(a, b)
                    })
                    .sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-20, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.975, 0.999999] {
            let z = normal_quantile(p);
            let back = normal_cdf(z);
            assert!(((back - p) / p).abs() < 1e-12, "p = {p}, back = {back}");
        }
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-13);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-7.0), -7.0 + TAU, epsilon = 1e-12);
    }

    #[test]
    fn std_mass_tails() {
        assert_abs_diff_eq!(std_normal_mass(-1.0, 1.0), 0.6826894921370859, epsilon = 1e-14);
        assert!(std_normal_mass(30.0, 31.0) > 0.0);
        assert!(std_normal_mass(-31.0, -30.0) > 0.0);
    }
}
