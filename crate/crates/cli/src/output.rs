//! Result files. Every CSV row and JSON document carries the tool version
//! and the configuration hash.
//!
//! CSV schema version 1:
//! - `trials.csv`: one row per controller, trial and step.
//! - `summary.csv`: per-step mean MSEE and 95% half-width per controller.
//! - `sweep_rows.csv`, `sweep_best.csv`, `sweep_agreement.csv`,
//!   `sweep_gaps.csv`, `sweep_baseline.csv`: the sweep tables.

use std::fs;
use std::path::Path;

use anyhow::Context as _;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("activeslam ", env!("CARGO_PKG_VERSION"));

/// Identifies the tool and configuration that produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub tool_version: String,
    pub config_hash: String,
    pub schema_version: u32,
}

impl Stamp {
    pub fn new(config_hash: &str) -> Self {
        Self { tool_version: TOOL_VERSION.to_string(), config_hash: config_hash.to_string(), schema_version: SCHEMA_VERSION }
    }

    /// Compact JSON form used as the header tag of binary files.
    pub fn tag(&self) -> String {
        serde_json::to_string(self).expect("stamp serializes")
    }
}

/// Writes `rows` as CSV with the stamp columns first.
pub fn write_csv(path: &Path, stamp: &Stamp, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut head = vec!["tool_version", "config_hash"];
    head.extend_from_slice(header);
    w.write_record(&head)?;
    for row in rows {
        let mut rec = vec![stamp.tool_version.clone(), stamp.config_hash.clone()];
        rec.extend(row);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    result: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, result: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&Stamped { stamp, result })?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip decimal form, so identical values print identically.
pub fn num(x: f64) -> String {
    format!("{x}")
}
