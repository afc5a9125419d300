//! Experiment configuration files.

use std::path::{Path, PathBuf};

use mbm::lab::{CostDistribution, Mode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that replaces the default seed.
pub const SEED_ENV: &str = "MBM_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BetaScan,
    Concentration,
    Subadditivity,
    DecimationAudit,
    AnomalousScaling,
    RandomLink,
}

/// A configuration as written in the file. Kind-specific fields are
/// optional here and checked by [`ExperimentConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Per-size trial counts, overriding `trials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_per_size: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub output: PathBuf,
    /// Optional per-trial length stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,

    /// Grid refinements for `subadditivity` and padded audits.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ms: Vec<u64>,
    /// Poisson means for the discrepancy check in `subadditivity`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    /// Also compare fixed and Poissonized means in `subadditivity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depoissonization: Option<bool>,
    /// Subdivision depths for `decimation_audit`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depths: Vec<u32>,
    /// Thresholds for `concentration`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Cost law for `random_link`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<CostDistribution>,
    /// Include the planar decimation growth check in `anomalous_scaling`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimation_growth: Option<bool>,
}

fn default_mode() -> Mode {
    Mode::Fixed
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fills in the seed, from the environment if the file has none.
    pub fn resolve_seed(&mut self, env_seed: Option<&str>) -> Result<(), ConfigError> {
        if self.seed.is_none() {
            self.seed = Some(match env_seed {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
                None => DEFAULT_SEED,
            });
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn trials_for(&self, index: usize) -> usize {
        self.trials_per_size.as_ref().map_or(self.trials, |t| t[index])
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| mbm::lab::DEFAULT_T_GRID.to_vec())
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.output.as_os_str().is_empty() {
            return bad("output path is empty".into());
        }
        if self.trials < 2 {
            return bad(format!("trials must be at least 2, got {}", self.trials));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if let Some(t) = &self.trials_per_size {
            if t.len() != self.sizes.len() {
                return bad(format!(
                    "trials_per_size has {} entries for {} sizes",
                    t.len(),
                    self.sizes.len()
                ));
            }
            if t.iter().any(|&n| n < 2) {
                return bad("every entry of trials_per_size must be at least 2".into());
            }
        }
        if self.kind != Kind::RandomLink {
            if self.dims.is_empty() {
                return bad("dims must not be empty".into());
            }
            if self.dims.contains(&0) {
                return bad("dimensions must be at least 1".into());
            }
            if self.dims.windows(2).any(|w| w[1] <= w[0]) {
                return bad("dims must be strictly increasing".into());
            }
        }
        if self.sizes.is_empty() {
            return bad("sizes must not be empty".into());
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sizes must be strictly increasing".into());
        }
        if self.sizes[0] == 0 {
            return bad("sizes must be positive".into());
        }
        match self.kind {
            Kind::BetaScan => {
                if self.dims.iter().any(|&d| d < 3) {
                    return bad("beta_scan needs dimensions >= 3".into());
                }
                if self.sizes.len() < 3 {
                    return bad("beta_scan needs at least 3 sizes".into());
                }
            }
            Kind::Concentration => {
                if let Some(g) = &self.t_grid {
                    if g.is_empty() || g.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                        return bad("t_grid must be nonempty and positive".into());
                    }
                }
            }
            Kind::Subadditivity => {
                if self.ms.is_empty() {
                    return bad("subadditivity needs ms".into());
                }
                if self.ms.contains(&0) {
                    return bad("ms must be at least 1".into());
                }
                if self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return bad("lambdas must be positive".into());
                }
                if self.mode != Mode::Poisson {
                    return bad("subadditivity is defined for mode = \"poisson\"".into());
                }
            }
            Kind::DecimationAudit => {
                if self.depths.is_empty() {
                    return bad("decimation_audit needs depths".into());
                }
                for &d in &self.dims {
                    for &k in &self.depths {
                        if k as usize * d > mbm::decimation::MAX_ADDRESS_BITS as usize {
                            return bad(format!("depth {k} in dimension {d} exceeds depth * dim <= 30"));
                        }
                    }
                }
                if self.ms.contains(&0) {
                    return bad("ms must be at least 1".into());
                }
            }
            Kind::AnomalousScaling => {
                if self.dims.iter().any(|&d| d > 2) {
                    return bad("anomalous_scaling is for dimensions 1 and 2".into());
                }
                if self.dims.contains(&2) && self.sizes[0] < 2 {
                    return bad("planar sizes must be at least 2".into());
                }
            }
            Kind::RandomLink => {
                if self.distribution.is_none() {
                    return bad("random_link needs distribution".into());
                }
            }
        }
        Ok(())
    }
}
