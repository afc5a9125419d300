//! Monte Carlo estimation and statistical checks of the scaling laws.
//!
//! Every trial draws its instance from a seed derived from the run seed and
//! the trial coordinates, so results do not depend on how trials are
//! scheduled across threads. Reductions are compensated sums in trial order.

mod anomalous;
mod checks;
mod fit;
mod random_link;

pub use anomalous::{
    anomalous_scaling_report, decimation_growth, natural_depth, AnomalousReport, AnomalousRow, DecimationGrowthReport,
    DecimationGrowthRow, PLANAR_BAND,
};
pub use checks::{
    check_concentration, check_depoissonization, check_mean_subadditivity, check_poisson_discrepancy,
    concentration_bound, concentration_from, subadditivity_from, subadditivity_small_n, ConcentrationReport,
    DepoissonizationReport, PoissonDiscrepancyReport, SubadditivityReport, DEFAULT_T_GRID,
};
pub use fit::{
    fit_beta, talagrand_scale, talagrand_trend, ScalingEstimate, TalagrandReport, TalagrandRow, TALAGRAND_BAND,
};
pub use random_link::{
    random_link_compare, random_link_mean, CostDistribution, RandomLinkInstance, RandomLinkReport, RandomLinkRow,
    RANDOM_LINK_LIMIT,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_exact, sorted_match_1d};
use crate::points::{sample_pair, Cardinality, PointCloud, SampleSpec};
use crate::rng::derive_seed;
use crate::stats::mean_stderr;

/// Number of standard errors allowed in the stochastic checks.
pub const SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Poisson,
}

impl Mode {
    pub fn cardinality(self, n: f64) -> Result<Cardinality> {
        match self {
            Mode::Fixed => {
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "fixed cardinality must be a whole number, got {n}"
                    )));
                }
                Ok(Cardinality::Fixed(n as usize))
            }
            Mode::Poisson => Ok(Cardinality::Poisson(n)),
        }
    }
}

/// Seed of one trial. The cardinality mode is deliberately not mixed in, so
/// fixed and Poissonized trials with the same coordinates share their point
/// sequences.
pub fn trial_seed(seed: u64, dim: usize, n: f64, trial: usize) -> u64 {
    derive_seed(seed, &[dim as u64, n.to_bits(), trial as u64])
}

/// Optimal matching length, by sorting when that is exact.
pub fn matching_length(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.dim() == 1 && x.len() == y.len() {
        Ok(sorted_match_1d(x, y)?.total_length)
    } else {
        Ok(solve_exact(x, y)?.total_length)
    }
}

/// The instance of one trial.
pub fn trial_instance(dim: usize, mode: Mode, n: f64, seed: u64) -> Result<(PointCloud, PointCloud)> {
    let card = mode.cardinality(n)?;
    let spec = SampleSpec {
        dim,
        cardinality: card,
        seed,
    };
    sample_pair(&spec, &spec)
}

/// Runs `f(trial, seed)` for every trial in parallel, collecting in order.
pub fn run_trials<T, F>(trials: usize, seed_of: impl Fn(usize) -> u64 + Sync, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed_of(t);
            f(t, s).map_err(|e| Error::Trial {
                trial: t,
                seed: s,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Sample mean of the optimal length at one size, with the raw trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub dim: usize,
    pub mode: Mode,
    /// Cardinality, or the Poisson mean.
    pub n: f64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seeds: Vec<u64>,
    pub lengths: Vec<f64>,
}

pub fn estimate_mean(dim: usize, mode: Mode, n: f64, trials: usize, seed: u64) -> Result<MeanEstimate> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    mode.cardinality(n)?;
    let seeds: Vec<u64> = (0..trials).map(|t| trial_seed(seed, dim, n, t)).collect();
    let lengths = run_trials(
        trials,
        |t| seeds[t],
        |_, s| {
            let (x, y) = trial_instance(dim, mode, n, s)?;
            matching_length(&x, &y)
        },
    )?;
    let (mean, stderr) = mean_stderr(&lengths);
    Ok(MeanEstimate {
        dim,
        mode,
        n,
        trials,
        mean,
        stderr,
        seeds,
        lengths,
    })
}
