/// Upper bound `1/n + (D/M) a (m - a) / m`, `a = floor(m/2)`, on the
/// 1-Wasserstein distance from any belief to its nearest simplex-grid point.
pub fn quantization_error_bound(n: usize, denominator: usize, m: usize, diameter: f64) -> f64 {
    let a = (m / 2) as f64;
    let m = m as f64;
    1.0 / n as f64 + diameter / denominator as f64 * a * (m - a) / m
}
