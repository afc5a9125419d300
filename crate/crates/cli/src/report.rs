//! Report and manifest documents and their byte-stable encoding.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// One line of the optional trial stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub dim: usize,
    pub trial: usize,
    pub seed: u64,
    pub length: f64,
}

/// Output of one experiment run; a pure function of the resolved config
/// minus the worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub results: Value,
    pub instances: usize,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

/// Run metadata that legitimately varies between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub workers: usize,
    pub instances: usize,
    pub wall_time_seconds: f64,
    pub report: PathBuf,
    pub trials_csv: Option<PathBuf>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

/// Pretty JSON with object keys sorted and floats in shortest round-trip
/// form, followed by a newline.
pub fn to_stable_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json's map without `preserve_order` is a BTreeMap
    let v: Value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// `out.json` -> `out.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}
