//! Experiment configuration, execution and reporting behind the `mbm` binary.

pub mod config;
pub mod report;
pub mod runner;
pub mod selftest;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use report::{Check, Report, RunManifest, Status};
pub use runner::{execute, run_to_files};
pub use selftest::{run_selftest, SelftestOptions, SelftestReport};
