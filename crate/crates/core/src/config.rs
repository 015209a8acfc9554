//! Run configuration: TOML sections, validation, provenance echo and hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::costs::ExplorationKind;
use crate::models::{MotionConfig, SensorConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceSection {
    pub half_width: f64,
}

impl Default for WorkspaceSection {
    fn default() -> Self {
        Self { half_width: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub dt: f64,
    pub v_max: f64,
    pub sigma_w: f64,
    pub start: [f64; 2],
}

impl Default for MotionSection {
    fn default() -> Self {
        Self { dt: 1.25, v_max: 0.2, sigma_w: 0.05, start: [-0.375, -0.375] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub eps: f64,
    pub r0: f64,
    pub r1: f64,
    pub r_max: f64,
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub n_landmarks: usize,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self { eps: 0.05, r0: 0.15, r1: 0.6, r_max: 1.0, sigma_r: 0.75, sigma_phi: 0.5, n_landmarks: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationSection {
    pub n_pose: usize,
    pub n_map: usize,
    pub n_action: usize,
    pub n_obs: usize,
    /// Overrides `n_obs` for range bins.
    pub n_range: Option<usize>,
    /// Overrides `n_obs` for bearing arcs.
    pub n_bearing: Option<usize>,
    pub denominator: usize,
    pub grid_cap: u64,
}

impl Default for QuantizationSection {
    fn default() -> Self {
        Self {
            n_pose: 4,
            n_map: 4,
            n_action: 8,
            n_obs: 4,
            n_range: None,
            n_bearing: None,
            denominator: 5,
            grid_cap: crate::quantization::DEFAULT_GRID_CAP as u64,
        }
    }
}

impl QuantizationSection {
    pub fn range_bins(&self) -> usize {
        self.n_range.unwrap_or(self.n_obs)
    }

    pub fn bearing_arcs(&self) -> usize {
        self.n_bearing.unwrap_or(self.n_obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub kind: ExplorationKind,
    pub lambda: f64,
    pub beta: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self { kind: ExplorationKind::Rao, lambda: 200.0, beta: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 10_000 }
    }
}

/// How the simulated belief is carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracking {
    /// Exact posterior; the grid point is used only for the policy lookup.
    Exact,
    /// The posterior is replaced by its nearest grid point after each update.
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub tracking: Tracking,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { trials: 3000, horizon: 20, seed: 20_240_601, tracking: Tracking::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub sigma_phi: Vec<f64>,
    pub kinds: Vec<ExplorationKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0],
            sigma_r: vec![0.5, 0.75, 1.0, 1.25],
            sigma_phi: vec![0.3, 0.5, 0.7],
            kinds: vec![ExplorationKind::Shannon, ExplorationKind::Rao],
        }
    }
}

impl SweepSection {
    /// Noise grid in row-major order over `(sigma_r, sigma_phi)`.
    pub fn noise_grid(&self) -> Vec<(f64, f64)> {
        self.sigma_r.iter().flat_map(|&r| self.sigma_phi.iter().map(move |&p| (r, p))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workspace: WorkspaceSection,
    pub motion: MotionSection,
    pub sensor: SensorSection,
    pub quantization: QuantizationSection,
    pub cost: CostSection,
    pub solver: SolverSection,
    pub evaluation: EvaluationSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Where a configuration value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Published,
    User,
    Default,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Self::Published => "published",
            Self::User => "user",
            Self::Default => "default",
        }
    }
}

/// Keys whose values are published experiment settings, with those values.
fn published(section: &str, key: &str) -> Vec<toml::Value> {
    use toml::Value::{Array, Float, Integer};
    let floats = |v: &[f64]| Array(v.iter().map(|x| Float(*x)).collect());
    vec![match (section, key) {
        ("sensor", "sigma_r") => Float(0.75),
        ("sensor", "sigma_phi") => Float(0.5),
        ("sensor", "n_landmarks") => Integer(1),
        ("quantization", "n_pose") | ("quantization", "n_map") | ("quantization", "n_obs") => Integer(4),
        ("quantization", "n_action") => Integer(8),
        ("quantization", "denominator") => return vec![Integer(5), Integer(6)],
        ("cost", "lambda") => Float(200.0),
        ("evaluation", "trials") => Integer(3000),
        ("evaluation", "horizon") => Integer(20),
        ("sweep", "lambdas") => floats(&[1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0]),
        ("sweep", "sigma_r") => floats(&[0.5, 0.75, 1.0, 1.25]),
        ("sweep", "sigma_phi") => floats(&[0.3, 0.5, 0.7]),
        ("sweep", "kinds") => Array(vec!["shannon".into(), "rao".into()]),
        _ => return Vec::new(),
    }]
}

fn same_value(a: &toml::Value, b: &toml::Value) -> bool {
    use toml::Value::{Array, Float, Integer};
    match (a, b) {
        (Integer(x), Float(y)) | (Float(y), Integer(x)) => *x as f64 == *y,
        (Array(x), Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same_value(p, q)),
        _ => a == b,
    }
}

/// Provenance of `section.key` given the raw user file. A value restating
/// the built-in default keeps the default marker.
fn provenance_of(raw: &toml::Table, section: &str, key: &str, value: &toml::Value) -> Provenance {
    let given = raw.get(section).and_then(|s| s.as_table()).and_then(|t| t.get(key));
    let defaults = toml::Table::try_from(RunConfig::default()).expect("config serializes");
    let default = defaults.get(section).and_then(|s| s.as_table()).and_then(|t| t.get(key));
    if published(section, key).iter().any(|p| same_value(value, p)) {
        Provenance::Published
    } else if given.is_some() && !default.is_some_and(|d| same_value(value, d)) {
        Provenance::User
    } else {
        Provenance::Default
    }
}

/// A parsed configuration together with the raw table it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    raw: toml::Table,
}

impl LoadedConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text)?;
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(Self { config, raw })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn defaults() -> Self {
        Self { config: RunConfig::default(), raw: toml::Table::new() }
    }

    pub fn provenance(&self, section: &str, key: &str) -> Option<Provenance> {
        let full = toml::Table::try_from(&self.config).ok()?;
        let value = full.get(section)?.as_table()?.get(key)?;
        Some(provenance_of(&self.raw, section, key, value))
    }

    /// The effective configuration, one `key = value` per line, each tagged
    /// with its provenance.
    pub fn echo(&self) -> String {
        let full = toml::Table::try_from(&self.config).expect("config serializes");
        let mut out = String::new();
        for (section, body) in &full {
            out.push_str(&format!("[{section}]\n"));
            if let Some(t) = body.as_table() {
                for (key, value) in t {
                    let p = provenance_of(&self.raw, section, key, value);
                    out.push_str(&format!("{key} = {value}  # provenance: {}\n", p.label()));
                }
            }
        }
        out
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid(msg.into()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn motion(&self) -> MotionConfig {
        MotionConfig {
            half_width: self.workspace.half_width,
            dt: self.motion.dt,
            v_max: self.motion.v_max,
            sigma_w: self.motion.sigma_w,
        }
    }

    pub fn sensor(&self) -> SensorConfig {
        let s = &self.sensor;
        SensorConfig {
            eps: s.eps,
            r0: s.r0,
            r1: s.r1,
            r_max: s.r_max,
            sigma_r: s.sigma_r,
            sigma_phi: s.sigma_phi,
            n_landmarks: s.n_landmarks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.motion().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sensor().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.motion().contains(self.motion.start) {
            return invalid("motion.start lies outside the workspace");
        }
        let q = &self.quantization;
        for (name, v) in [
            ("n_pose", q.n_pose),
            ("n_map", q.n_map),
            ("n_action", q.n_action),
            ("n_range", q.range_bins()),
            ("n_bearing", q.bearing_arcs()),
            ("denominator", q.denominator),
        ] {
            if v == 0 {
                return invalid(format!("quantization.{name} must be at least 1"));
            }
        }
        if !(self.cost.lambda >= 0.0 && self.cost.lambda.is_finite()) {
            return invalid("cost.lambda must be non-negative");
        }
        if !(self.cost.beta > 0.0 && self.cost.beta < 1.0) {
            return invalid("cost.beta must lie in (0, 1)");
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return invalid("solver.tol and solver.max_iter must be positive");
        }
        if self.evaluation.trials == 0 || self.evaluation.horizon == 0 {
            return invalid("evaluation.trials and evaluation.horizon must be positive");
        }
        let sw = &self.sweep;
        if sw.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return invalid("sweep.lambdas must be non-negative");
        }
        if sw.sigma_r.iter().chain(&sw.sigma_phi).any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid("sweep noise levels must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of every setting except the output
    /// directory, which does not affect any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection { dir: String::new() };
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    /// Hash of the settings that determine the quantized model; the sensor
    /// noise is passed explicitly because sweeps vary it.
    pub fn model_hash(&self, sigma_r: f64, sigma_phi: f64) -> String {
        let key = serde_json::json!({
            "workspace": self.workspace,
            "motion": { "dt": self.motion.dt, "v_max": self.motion.v_max, "sigma_w": self.motion.sigma_w },
            "sensor": self.sensor().with_noise(sigma_r, sigma_phi),
            "quantization": self.quantization,
        });
        hex(&Sha256::digest(serde_json::to_vec(&key).expect("key serializes")))
    }
}
