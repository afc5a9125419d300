//! Low-dimensional scalings: `sqrt(N)` with non-vanishing fluctuations on
//! the line, `sqrt(N ln N)` in the plane.

use serde::{Deserialize, Serialize};

use super::{estimate_mean, run_trials, trial_instance, trial_seed, Mode, SIGMAS};
use crate::decimation::{decimation_match, MAX_ADDRESS_BITS};
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::stats::{mean_stderr, variance};

/// Band allowed for `max / min` of the normalized planar means.
pub const PLANAR_BAND: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousRow {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Mean of `L / norm(N)`.
    pub normalized_mean: f64,
    /// Sample variance of `L / norm(N)`.
    pub normalized_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousReport {
    pub dim: usize,
    /// `sqrt(N)` on the line, `sqrt(N ln N)` in the plane.
    pub normalization: String,
    pub rows: Vec<AnomalousRow>,
    /// False when the sizes do not span a decade; the trend fields are then
    /// `None`.
    pub trend_checked: bool,
    /// Line: last over first normalized variance.
    pub variance_ratio: Option<f64>,
    /// Plane: max over min of the normalized means.
    pub band_ratio: Option<f64>,
    pub holds: Option<bool>,
}

fn broadcast(trials: &[usize], len: usize) -> Result<Vec<usize>> {
    match trials.len() {
        1 => Ok(vec![trials[0]; len]),
        l if l == len => Ok(trials.to_vec()),
        l => Err(Error::InvalidArgument(format!("{l} trial counts for {len} sizes"))),
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sizes must be nonempty and strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn anomalous_scaling_report(dim: usize, sizes: &[usize], trials: &[usize], seed: u64) -> Result<AnomalousReport> {
    check_sizes(sizes)?;
    let trials = broadcast(trials, sizes.len())?;
    let norm = |n: f64| match dim {
        1 => Ok(n.sqrt()),
        2 => Ok((n * n.ln()).sqrt()),
        _ => Err(Error::InvalidArgument(format!(
            "anomalous scalings are for dim 1 or 2, got {dim}"
        ))),
    };
    norm(1.0)?;
    if dim == 2 && sizes[0] < 2 {
        return Err(Error::InvalidArgument("planar normalization needs N >= 2".into()));
    }
    if sizes[0] == 0 {
        return Err(Error::InvalidArgument("sizes must be positive".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (&n, &t) in sizes.iter().zip(&trials) {
        let est = estimate_mean(dim, Mode::Fixed, n as f64, t, seed)?;
        let s = norm(n as f64)?;
        let z: Vec<f64> = est.lengths.iter().map(|l| l / s).collect();
        rows.push(AnomalousRow {
            n,
            trials: t,
            mean: est.mean,
            stderr: est.stderr,
            normalized_mean: est.mean / s,
            normalized_variance: variance(&z),
        });
    }
    let trend_checked = sizes.len() >= 2 && sizes[sizes.len() - 1] >= 10 * sizes[0];
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let (mut variance_ratio, mut band_ratio, mut holds) = (None, None, None);
    if trend_checked {
        if dim == 1 {
            let r = last.normalized_variance / first.normalized_variance;
            variance_ratio = Some(r);
            holds = Some(r > 0.5);
        } else {
            let max = rows.iter().map(|r| r.normalized_mean).fold(f64::NEG_INFINITY, f64::max);
            let min = rows.iter().map(|r| r.normalized_mean).fold(f64::INFINITY, f64::min);
            let r = max / min;
            band_ratio = Some(r);
            holds = Some(r <= PLANAR_BAND);
        }
    }
    Ok(AnomalousReport {
        dim,
        normalization: if dim == 1 { "sqrt(N)" } else { "sqrt(N ln N)" }.into(),
        rows,
        trend_checked,
        variance_ratio,
        band_ratio,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationGrowthRow {
    pub n: usize,
    pub depth: u32,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `mean / (sqrt(N) ln N)`.
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationGrowthReport {
    pub dim: usize,
    pub rows: Vec<DecimationGrowthRow>,
    /// Smallest `C` with `mean <= C sqrt(N) ln N` at every size.
    pub fitted_c: f64,
    /// The ratio at the largest size does not exceed the one at the
    /// smallest by more than three standard errors.
    pub holds: bool,
}

/// Depth giving about one point per leaf cell.
pub fn natural_depth(dim: usize, n: usize) -> u32 {
    let k = ((n.max(2) as f64).log2() / dim as f64).floor() as u32;
    k.clamp(1, MAX_ADDRESS_BITS / dim as u32)
}

/// Mean length of the recursive construction against `sqrt(N) ln N`.
pub fn decimation_growth(dim: usize, sizes: &[usize], trials: &[usize], seed: u64) -> Result<DecimationGrowthReport> {
    check_sizes(sizes)?;
    if sizes[0] < 2 {
        return Err(Error::InvalidArgument("sizes must be at least 2".into()));
    }
    let trials = broadcast(trials, sizes.len())?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (&n, &t) in sizes.iter().zip(&trials) {
        if t < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 trials, got {t}")));
        }
        let nf = n as f64;
        let depth = natural_depth(dim, n);
        let lengths = run_trials(
            t,
            |i| trial_seed(seed, dim, nf, i),
            |_, s| {
                let (x, y) = trial_instance(dim, Mode::Fixed, nf, s)?;
                Ok(decimation_match(&x, &y, depth, solve_exact)?.total_length())
            },
        )?;
        let (mean, stderr) = mean_stderr(&lengths);
        let scale = nf.sqrt() * nf.ln();
        rows.push(DecimationGrowthRow {
            n,
            depth,
            trials: t,
            mean,
            stderr,
            ratio: mean / scale,
            ratio_stderr: stderr / scale,
        });
    }
    let fitted_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let slack = SIGMAS * (first.ratio_stderr.powi(2) + last.ratio_stderr.powi(2)).sqrt();
    Ok(DecimationGrowthReport {
        dim,
        holds: last.ratio <= first.ratio + slack,
        fitted_c,
        rows,
    })
}
