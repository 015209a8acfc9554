//! Metrics on finite state spaces and exact discrete 1-Wasserstein distances.
//!
//! The transport problems that show up here are small and dense (at most a few
//! hundred atoms), so they are solved exactly by successive shortest paths on
//! the bipartite residual network. No entropic smoothing is involved.

use thiserror::Error;

/// Absolute tolerance for "sums to one" checks on probability vectors.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Residual mass below which a node counts as exhausted in the transport solver.
const FLOW_EPS: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric order p must be a finite value >= 1, got {0}")]
    InvalidOrder(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("marginal masses differ: {0} vs {1}")]
    MarginalMismatch(f64, f64),
    #[error("negative or non-finite mass {value} at index {index}")]
    InvalidMass { index: usize, value: f64 },
    #[error("index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("distance matrix is not a metric matrix: {0}")]
    NotAMetric(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Euclidean distance between two coordinate tuples of equal length.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Product metric on the joint pose/map space:
/// `d((x, m), (x', m')) = (d_X(x, x')^p + d_M(m, m')^p)^(1/p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMetric {
    p: f64,
}

impl Default for ProductMetric {
    fn default() -> Self {
        Self { p: 2.0 }
    }
}

impl ProductMetric {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(MetricError::InvalidOrder(p));
        }
        Ok(Self { p })
    }

    pub fn order(&self) -> f64 {
        self.p
    }

    /// Combines a pose distance and a map distance.
    pub fn combine(&self, d_pose: f64, d_map: f64) -> f64 {
        if self.p == 1.0 {
            d_pose + d_map
        } else if self.p == 2.0 {
            d_pose.hypot(d_map)
        } else {
            (d_pose.powf(self.p) + d_map.powf(self.p)).powf(1.0 / self.p)
        }
    }

    pub fn distance(&self, a: &JointState<'_>, b: &JointState<'_>) -> Result<f64> {
        if a.pose.len() != b.pose.len() {
            return Err(MetricError::DimensionMismatch(a.pose.len(), b.pose.len()));
        }
        if a.map.len() != b.map.len() {
            return Err(MetricError::DimensionMismatch(a.map.len(), b.map.len()));
        }
        Ok(self.combine(euclidean(a.pose, b.pose), euclidean(a.map, b.map)))
    }
}

/// A joint state `(pose, map)`; the map is the flattened landmark coordinate tuple.
#[derive(Debug, Clone, Copy)]
pub struct JointState<'a> {
    pub pose: &'a [f64],
    pub map: &'a [f64],
}

/// `(d_X^p + d_M^p)^(1/p)` between two joint states.
pub fn product_distance(a: &JointState<'_>, b: &JointState<'_>, p: f64) -> Result<f64> {
    ProductMetric::new(p)?.distance(a, b)
}

/// Dense symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    diameter: f64,
}

impl DistanceMatrix {
    /// Builds the matrix by evaluating `dist` on every unordered pair.
    pub fn from_fn(n: usize, mut dist: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        let diameter = data.iter().copied().fold(0.0, f64::max);
        Self { n, data, diameter }
    }

    pub fn euclidean(points: &[Vec<f64>]) -> Self {
        Self::from_fn(points.len(), |i, j| euclidean(&points[i], &points[j]))
    }

    /// Wraps a row-major table after checking the metric-matrix shape invariants.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(MetricError::DimensionMismatch(data.len(), n * n));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(MetricError::NotAMetric(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = data[i * n + j];
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(MetricError::NotAMetric(format!("entry ({i},{j}) = {d}")));
                }
                if d != data[j * n + i] {
                    return Err(MetricError::NotAMetric(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        let diameter = data.iter().copied().fold(0.0, f64::max);
        Ok(Self { n, data, diameter })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

fn check_distribution(v: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (index, &value) in v.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(MetricError::InvalidMass { index, value });
        }
        total += value;
    }
    Ok(total)
}

/// Total-variation distance `0.5 * ||mu - nu||_1`.
pub fn total_variation(mu: &[f64], nu: &[f64]) -> f64 {
    0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Exact 1-Wasserstein distance between two distributions on the same finite space.
pub fn wasserstein1(mu: &[f64], nu: &[f64], d: &DistanceMatrix) -> Result<f64> {
    if mu.len() != d.len() {
        return Err(MetricError::DimensionMismatch(mu.len(), d.len()));
    }
    if nu.len() != d.len() {
        return Err(MetricError::DimensionMismatch(nu.len(), d.len()));
    }
    transport_cost(mu, nu, |i, j| d.get(i, j))
}

/// `W1(b, delta_m) = sum_i b_i d(i, m)`: every unit of mass travels to `m`.
pub fn wasserstein_to_dirac(b: &[f64], m_index: usize, d: &DistanceMatrix) -> Result<f64> {
    if m_index >= d.len() {
        return Err(MetricError::IndexOutOfRange { index: m_index, len: d.len() });
    }
    if b.len() != d.len() {
        return Err(MetricError::DimensionMismatch(b.len(), d.len()));
    }
    Ok(b.iter().zip(d.row(m_index)).map(|(p, dist)| p * dist).sum())
}

/// Optimal value of the balanced transportation problem
/// `min sum_ij psi_ij c(i, j)` subject to row sums `supply` and column sums `demand`.
///
/// Supports and demands may live on different point sets; `cost` supplies the
/// ground distance between source `i` and sink `j`.
pub fn transport_cost(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let plan = transport_plan(supply, demand, cost)?;
    Ok(plan.cost)
}

/// An optimal coupling in sparse form.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(source, sink, mass)` triples with positive mass.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Successive-shortest-path solver for the dense transportation problem.
pub fn transport_plan(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<TransportPlan> {
    let s_total = check_distribution(supply)?;
    let d_total = check_distribution(demand)?;
    if (s_total - d_total).abs() > MASS_TOLERANCE {
        return Err(MetricError::MarginalMismatch(s_total, d_total));
    }

    // Zero-mass atoms never carry flow.
    let src: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0.0).collect();
    let dst: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0.0).collect();
    let (a, b) = (src.len(), dst.len());
    if a == 0 || b == 0 {
        return Ok(TransportPlan { cost: 0.0, flows: Vec::new() });
    }

    let c: Vec<f64> = src
        .iter()
        .flat_map(|&i| dst.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .collect();
    let mut rs: Vec<f64> = src.iter().map(|&i| supply[i]).collect();
    // Absorb the (tolerated) imbalance into the sinks so the flow closes exactly.
    let scale = s_total / d_total;
    let mut rd: Vec<f64> = dst.iter().map(|&j| demand[j] * scale).collect();
    let mut flow = vec![0.0; a * b];

    let nodes = a + b;
    let mut dist = vec![f64::INFINITY; nodes];
    let mut pred = vec![usize::MAX; nodes];
    let mut remaining: f64 = rs.iter().sum();

    while remaining > FLOW_EPS * s_total.max(1.0) {
        // Bellman-Ford from all sources that still have supply.
        dist.iter_mut().for_each(|x| *x = f64::INFINITY);
        pred.iter_mut().for_each(|x| *x = usize::MAX);
        for i in 0..a {
            if rs[i] > FLOW_EPS {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..a {
                if dist[i].is_finite() {
                    for j in 0..b {
                        let nd = dist[i] + c[i * b + j];
                        if nd < dist[a + j] - 1e-13 {
                            dist[a + j] = nd;
                            pred[a + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..b {
                if dist[a + j].is_finite() {
                    for i in 0..a {
                        if flow[i * b + j] > FLOW_EPS {
                            let nd = dist[a + j] - c[i * b + j];
                            if nd < dist[i] - 1e-13 {
                                dist[i] = nd;
                                pred[i] = a + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut target = None;
        for j in 0..b {
            if rd[j] > FLOW_EPS && dist[a + j].is_finite() {
                match target {
                    Some(t) if dist[a + t] <= dist[a + j] => {}
                    _ => target = Some(j),
                }
            }
        }
        let Some(t) = target else { break };

        // Walk back to the originating source and find the bottleneck.
        let mut bottleneck = rd[t];
        let mut node = a + t;
        let start;
        loop {
            let p = pred[node];
            if node >= a {
                // reached sink `node` from source `p` via a forward arc
                if pred[p] == usize::MAX {
                    start = p;
                    break;
                }
                node = p;
            } else {
                // reached source `node` from sink `p` via a backward arc
                let j = p - a;
                bottleneck = bottleneck.min(flow[node * b + j]);
                node = p;
            }
        }
        bottleneck = bottleneck.min(rs[start]);

        let mut node = a + t;
        loop {
            let p = pred[node];
            if node >= a {
                flow[p * b + (node - a)] += bottleneck;
                if p == start {
                    break;
                }
            } else {
                let j = p - a;
                let f = &mut flow[node * b + j];
                *f -= bottleneck;
                if *f < FLOW_EPS {
                    *f = 0.0;
                }
            }
            node = p;
        }
        rs[start] -= bottleneck;
        rd[t] -= bottleneck;
        if rs[start] < FLOW_EPS {
            rs[start] = 0.0;
        }
        if rd[t] < FLOW_EPS {
            rd[t] = 0.0;
        }
        remaining -= bottleneck;
    }

    let mut total = 0.0;
    let mut flows = Vec::new();
    for i in 0..a {
        for j in 0..b {
            let f = flow[i * b + j];
            if f > 0.0 {
                total += f * c[i * b + j];
                flows.push((src[i], dst[j], f));
            }
        }
    }
    Ok(TransportPlan { cost: total, flows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> DistanceMatrix {
        DistanceMatrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn product_distance_examples() {
        let o = [0.0, 0.0];
        let s = JointState { pose: &o, map: &o };
        assert_eq!(product_distance(&s, &s, 2.0).unwrap(), 0.0);

        let x = [3.0, 0.0];
        let m = [0.0, 4.0];
        let t = JointState { pose: &x, map: &m };
        assert_abs_diff_eq!(product_distance(&s, &t, 2.0).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(product_distance(&s, &t, 1.0).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            product_distance(&s, &t, 3.0).unwrap(),
            (27.0f64 + 64.0).cbrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn product_metric_rejects_small_order() {
        assert_eq!(ProductMetric::new(0.5), Err(MetricError::InvalidOrder(0.5)));
        assert!(ProductMetric::new(f64::NAN).is_err());
    }

    #[test]
    fn product_distance_rejects_dimension_mismatch() {
        let a = [0.0, 0.0];
        let b = [0.0];
        let s = JointState { pose: &a, map: &a };
        let t = JointState { pose: &b, map: &a };
        assert!(product_distance(&s, &t, 2.0).is_err());
    }

    #[test]
    fn distance_matrix_invariants() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let d = DistanceMatrix::euclidean(&pts);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(1, 2), d.get(2, 1));
        assert_abs_diff_eq!(d.diameter(), 5f64.sqrt(), epsilon = 1e-15);
        assert!(DistanceMatrix::from_rows(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_rows(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn wasserstein_identity_and_diracs() {
        let d = DistanceMatrix::euclidean(&[vec![0.0], vec![2.5], vec![4.0]]);
        let mu = [0.2, 0.3, 0.5];
        assert_abs_diff_eq!(wasserstein1(&mu, &mu, &d).unwrap(), 0.0, epsilon = 1e-15);
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 0.0, 1.0];
        assert_abs_diff_eq!(wasserstein1(&a, &b, &d).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn wasserstein_two_point_enumeration() {
        // Couplings of (0.5, 0.5) and (1, 0) are forced: psi = [[0.5, 0], [0.5, 0]].
        let v = wasserstein1(&[0.5, 0.5], &[1.0, 0.0], &two_point()).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn wasserstein_rejects_mass_mismatch() {
        let err = wasserstein1(&[0.5, 0.4], &[1.0, 0.0], &two_point()).unwrap_err();
        assert!(matches!(err, MetricError::MarginalMismatch(..)));
        assert!(wasserstein1(&[-0.1, 1.1], &[1.0, 0.0], &two_point()).is_err());
    }

    #[test]
    fn dirac_closed_form_examples() {
        let d = two_point();
        assert_eq!(wasserstein_to_dirac(&[0.0, 1.0], 1, &d).unwrap(), 0.0);
        assert_abs_diff_eq!(wasserstein_to_dirac(&[0.5, 0.5], 0, &d).unwrap(), 0.5);
        assert!(matches!(
            wasserstein_to_dirac(&[0.5, 0.5], 2, &d),
            Err(MetricError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn transport_plan_marginals() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.7, (i * i) as f64 * 0.1]).collect();
        let d = DistanceMatrix::euclidean(&pts);
        let mu = [0.1, 0.2, 0.05, 0.25, 0.3, 0.1];
        let nu = [0.3, 0.0, 0.2, 0.1, 0.15, 0.25];
        let plan = transport_plan(&mu, &nu, |i, j| d.get(i, j)).unwrap();
        let mut rows = [0.0; 6];
        let mut cols = [0.0; 6];
        for &(i, j, f) in &plan.flows {
            rows[i] += f;
            cols[j] += f;
        }
        for k in 0..6 {
            assert_abs_diff_eq!(rows[k], mu[k], epsilon = 1e-12);
            assert_abs_diff_eq!(cols[k], nu[k], epsilon = 1e-12);
        }
    }
}
