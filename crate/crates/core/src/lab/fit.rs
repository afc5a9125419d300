//! Finite-size fit of the normalized mean and the large-dimension scale.

use serde::{Deserialize, Serialize};

use super::MeanEstimate;
use crate::error::{Error, Result};

/// z-value of the reported two-sided 95% interval.
const Z95: f64 = 1.96;

/// Fit of `mean(N) = beta N^(1-1/d) + c N^(1-1/d-gamma)` with
/// `gamma = 1/2 - 1/d`, weighted by inverse variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub dim: usize,
    pub sizes: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub trials: Vec<usize>,
    pub gamma: f64,
    pub beta_hat: f64,
    /// Half-width of the 95% interval, inflated by the reduced chi-square
    /// when that exceeds one.
    pub beta_ci: f64,
    pub correction: f64,
    pub reduced_chi2: f64,
    /// `mean / N^(1-1/d)` per size.
    pub stabilization: Vec<f64>,
    /// Absolute differences of consecutive stabilization values.
    pub stabilization_differences: Vec<f64>,
    /// The last difference is below the one before it; `None` with fewer
    /// than three sizes.
    pub stabilizing: Option<bool>,
    /// `beta_hat` refitted without the smallest size, when at least three
    /// sizes remain.
    pub beta_without_smallest: Option<f64>,
    /// `|beta_without_smallest - beta_hat| / beta_hat`.
    pub drop_smallest_shift: Option<f64>,
    /// The sizes span at least a factor of ten.
    pub spans_decade: bool,
}

struct Fit {
    beta: f64,
    correction: f64,
    se_beta: f64,
    reduced_chi2: f64,
}

fn weighted_fit(dim: usize, sizes: &[f64], means: &[f64], stderrs: &[f64]) -> Result<Fit> {
    let d = dim as f64;
    let p = 1.0 - 1.0 / d;
    let gamma = 0.5 - 1.0 / d;
    let k = sizes.len();
    // columns are rescaled to unit weighted norm before solving
    let mut cols = [vec![0.0; k], vec![0.0; k]];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        let floor = (1e-9 * means[i].abs()).powi(2) + f64::MIN_POSITIVE;
        let w = 1.0 / (stderrs[i] * stderrs[i]).max(floor);
        let sw = w.sqrt();
        cols[0][i] = sw * sizes[i].powf(p);
        cols[1][i] = sw * sizes[i].powf(p - gamma);
        rhs[i] = sw * means[i];
    }
    let norms = [norm(&cols[0]), norm(&cols[1])];
    if !(norms[0] > 0.0 && norms[1] > 0.0 && norms.iter().all(|n| n.is_finite())) {
        return Err(Error::FitFailure("degenerate design".into()));
    }
    for (c, n) in cols.iter_mut().zip(norms) {
        c.iter_mut().for_each(|v| *v /= n);
    }
    let g00 = dot(&cols[0], &cols[0]);
    let g01 = dot(&cols[0], &cols[1]);
    let g11 = dot(&cols[1], &cols[1]);
    let det = g00 * g11 - g01 * g01;
    if det.is_nan() || det <= 1e-14 {
        return Err(Error::FitFailure(format!("singular normal equations (det {det:e})")));
    }
    let b0 = dot(&cols[0], &rhs);
    let b1 = dot(&cols[1], &rhs);
    let beta = (g11 * b0 - g01 * b1) / det / norms[0];
    let correction = (g00 * b1 - g01 * b0) / det / norms[1];
    let var_beta = g11 / det / (norms[0] * norms[0]);
    let chi2: f64 = (0..k)
        .map(|i| {
            let r = rhs[i] - beta * cols[0][i] * norms[0] - correction * cols[1][i] * norms[1];
            r * r
        })
        .sum();
    let dof = k.saturating_sub(2);
    let reduced_chi2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let se_beta = (var_beta * reduced_chi2.max(1.0)).sqrt();
    if !(beta.is_finite() && correction.is_finite() && se_beta.is_finite()) {
        return Err(Error::FitFailure("non-finite parameters".into()));
    }
    Ok(Fit {
        beta,
        correction,
        se_beta,
        reduced_chi2,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Fits the scaling constant from mean estimates at increasing sizes.
pub fn fit_beta(estimates: &[MeanEstimate]) -> Result<ScalingEstimate> {
    let Some(first) = estimates.first() else {
        return Err(Error::InvalidArgument("no estimates to fit".into()));
    };
    let dim = first.dim;
    if estimates.iter().any(|e| e.dim != dim) {
        return Err(Error::InvalidArgument("estimates mix dimensions".into()));
    }
    let sizes: Vec<f64> = estimates.iter().map(|e| e.n).collect();
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let stderrs: Vec<f64> = estimates.iter().map(|e| e.stderr).collect();
    let trials = estimates.iter().map(|e| e.trials).collect();
    fit_summary(dim, sizes, means, stderrs, trials)
}

pub(crate) fn fit_summary(
    dim: usize,
    sizes: Vec<f64>,
    means: Vec<f64>,
    stderrs: Vec<f64>,
    trials: Vec<usize>,
) -> Result<ScalingEstimate> {
    if dim < 3 {
        return Err(Error::InvalidArgument(format!(
            "the power-law fit needs dim >= 3, got {dim}"
        )));
    }
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 sizes, got {}",
            sizes.len()
        )));
    }
    if sizes[0] <= 0.0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sizes must be positive and strictly increasing".into(),
        ));
    }
    let fit = weighted_fit(dim, &sizes, &means, &stderrs)?;
    if fit.beta.is_nan() || fit.beta <= 0.0 {
        return Err(Error::FitFailure(format!("fitted beta {} is not positive", fit.beta)));
    }
    let p = 1.0 - 1.0 / dim as f64;
    let stabilization: Vec<f64> = sizes.iter().zip(&means).map(|(n, m)| m / n.powf(p)).collect();
    let stabilization_differences: Vec<f64> = stabilization.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let k = stabilization_differences.len();
    let stabilizing = (k >= 2).then(|| stabilization_differences[k - 1] < stabilization_differences[k - 2]);
    let beta_without_smallest = if sizes.len() > 3 {
        weighted_fit(dim, &sizes[1..], &means[1..], &stderrs[1..])
            .ok()
            .map(|f| f.beta)
    } else {
        None
    };
    Ok(ScalingEstimate {
        dim,
        spans_decade: sizes[sizes.len() - 1] >= 10.0 * sizes[0],
        gamma: 0.5 - 1.0 / dim as f64,
        beta_hat: fit.beta,
        beta_ci: Z95 * fit.se_beta,
        correction: fit.correction,
        reduced_chi2: fit.reduced_chi2,
        stabilization,
        stabilization_differences,
        stabilizing,
        drop_smallest_shift: beta_without_smallest.map(|b| (b - fit.beta).abs() / fit.beta),
        beta_without_smallest,
        sizes,
        means,
        stderrs,
        trials,
    })
}

/// Leading large-dimension behaviour `sqrt(d / (2 e pi))`.
pub fn talagrand_scale(dim: usize) -> f64 {
    (dim as f64 / (2.0 * std::f64::consts::E * std::f64::consts::PI)).sqrt()
}

/// Band the ratios `beta_hat / sqrt(d / (2 e pi))` are required to lie in.
pub const TALAGRAND_BAND: (f64, f64) = (1.0, 2.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalagrandRow {
    pub dim: usize,
    pub beta_hat: f64,
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalagrandReport {
    pub rows: Vec<TalagrandRow>,
    pub band: (f64, f64),
    pub strictly_increasing: bool,
    pub ratios_in_band: bool,
    /// `max ratio - min ratio`.
    pub ratio_spread: f64,
    pub holds: bool,
}

/// Compares fitted constants with the large-dimension scale. Needs at least
/// three dimensions.
pub fn talagrand_trend(beta_hats: &[(usize, f64)]) -> Result<TalagrandReport> {
    if beta_hats.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 dimensions, got {}",
            beta_hats.len()
        )));
    }
    let mut sorted = beta_hats.to_vec();
    sorted.sort_by_key(|&(d, _)| d);
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("duplicate dimension".into()));
    }
    let rows: Vec<TalagrandRow> = sorted
        .iter()
        .map(|&(dim, beta_hat)| {
            let scale = talagrand_scale(dim);
            TalagrandRow {
                dim,
                beta_hat,
                scale,
                ratio: beta_hat / scale,
            }
        })
        .collect();
    let strictly_increasing = rows.windows(2).all(|w| w[1].beta_hat > w[0].beta_hat);
    let ratios_in_band = rows
        .iter()
        .all(|r| r.ratio >= TALAGRAND_BAND.0 && r.ratio <= TALAGRAND_BAND.1);
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let positive = rows.iter().all(|r| r.ratio > 0.0);
    Ok(TalagrandReport {
        rows,
        band: TALAGRAND_BAND,
        strictly_increasing,
        ratios_in_band,
        ratio_spread: max - min,
        holds: positive && strictly_increasing && ratios_in_band,
    })
}
