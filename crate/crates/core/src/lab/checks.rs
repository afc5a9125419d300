//! Statistical checks of the discrepancy, subadditivity, de-Poissonization
//! and concentration inequalities.

use serde::{Deserialize, Serialize};

use super::{estimate_mean, matching_length, run_trials, trial_instance, trial_seed, MeanEstimate, Mode, SIGMAS};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, sample_poisson, stream_rng};
use crate::stats::{compensated_sum, mean_stderr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonDiscrepancyReport {
    pub lambda: f64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `sqrt(2 lambda)`.
    pub bound: f64,
    pub holds: bool,
}

/// Mean of `|n1 - n2|` for independent Poisson(lambda) counts.
pub fn check_poisson_discrepancy(lambda: f64, trials: usize, seed: u64) -> Result<PoissonDiscrepancyReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let diffs: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = stream_rng(derive_seed(seed, &[lambda.to_bits(), t as u64]), 0);
            let a = sample_poisson(&mut rng, lambda);
            let b = sample_poisson(&mut rng, lambda);
            a.abs_diff(b) as f64
        })
        .collect();
    let (mean, stderr) = mean_stderr(&diffs);
    let bound = (2.0 * lambda).sqrt();
    Ok(PoissonDiscrepancyReport {
        lambda,
        trials,
        mean,
        stderr,
        bound,
        holds: mean <= bound + SIGMAS * stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub dim: usize,
    pub n: f64,
    pub m: u64,
    /// `floor(log2 m)`.
    pub k: u32,
    pub trials: usize,
    pub mean_n: f64,
    pub stderr_n: f64,
    /// Poisson mean of the small instances, `N / m^d`.
    pub n_small: f64,
    pub mean_small: f64,
    pub stderr_small: f64,
    /// `2^d sqrt(2 d N) sum_{k=0..K} 2^(k (d/2 - 1))`.
    pub boundary_term: f64,
    /// `m^(d-1) M(N / m^d) + boundary_term`.
    pub rhs: f64,
    pub combined_stderr: f64,
    pub holds: bool,
}

/// Poissonized mean subadditivity across an `m`-fold grid.
pub fn check_mean_subadditivity(dim: usize, n: f64, m: u64, trials: usize, seed: u64) -> Result<SubadditivityReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidArgument(format!("N must be positive, got {n}")));
    }
    let big = estimate_mean(dim, Mode::Poisson, n, trials, seed)?;
    let small = if m == 1 {
        big.clone()
    } else {
        estimate_mean(dim, Mode::Poisson, subadditivity_small_n(dim, n, m), trials, seed)?
    };
    subadditivity_from(&big, &small, m)
}

/// `N / m^d`.
pub fn subadditivity_small_n(dim: usize, n: f64, m: u64) -> f64 {
    n / (m as f64).powi(dim as i32)
}

/// The subadditivity check on Poissonized estimates at `N` and `N / m^d`.
pub fn subadditivity_from(big: &MeanEstimate, small: &MeanEstimate, m: u64) -> Result<SubadditivityReport> {
    let dim = big.dim;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if big.mode != Mode::Poisson || small.mode != Mode::Poisson || small.dim != dim {
        return Err(Error::InvalidArgument(
            "subadditivity needs Poissonized estimates of one dimension".into(),
        ));
    }
    let n = big.n;
    let n_small = subadditivity_small_n(dim, n, m);
    if (small.n - n_small).abs() > 1e-9 * n_small.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "small estimate at {} instead of {n_small}",
            small.n
        )));
    }
    let d = dim as f64;
    let k = 63 - m.leading_zeros();
    let factor = (m as f64).powi(dim as i32 - 1);
    let geometric = compensated_sum((0..=k).map(|kk| 2f64.powf(kk as f64 * (d / 2.0 - 1.0))));
    let boundary_term = 2f64.powi(dim as i32) * (2.0 * d * n).sqrt() * geometric;
    let rhs = factor * small.mean + boundary_term;
    let combined_stderr = if m == 1 {
        0.0
    } else {
        (big.stderr * big.stderr + factor * factor * small.stderr * small.stderr).sqrt()
    };
    Ok(SubadditivityReport {
        dim,
        n,
        m,
        k,
        trials: big.trials,
        mean_n: big.mean,
        stderr_n: big.stderr,
        n_small,
        mean_small: small.mean,
        stderr_small: small.stderr,
        boundary_term,
        rhs,
        combined_stderr,
        holds: big.mean <= rhs + SIGMAS * combined_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepoissonizationReport {
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    pub fixed_mean: f64,
    pub poisson_mean: f64,
    /// `fixed_mean - poisson_mean`, from paired trials.
    pub difference: f64,
    pub difference_stderr: f64,
    /// `2 sqrt(2 d N)`.
    pub bound: f64,
    /// `|difference| <= bound` with no statistical slack.
    pub mean_bound_holds: bool,
    /// `|difference| <= bound + 3 stderr`.
    pub mean_bound_holds_within_stderr: bool,
    /// Coupled trials where `|L_fixed - L_poisson| <= sqrt(d) (|N1 - N| + |N2 - N|)` failed.
    pub coupling_violations: usize,
    /// Largest `|L_fixed - L_poisson| / (sqrt(d) (|N1 - N| + |N2 - N|))`
    /// over trials with a nonzero right side.
    pub max_coupling_ratio: f64,
    pub holds: bool,
}

/// Fixed versus Poissonized means on prefix-coupled samples.
pub fn check_depoissonization(dim: usize, n: usize, trials: usize, seed: u64) -> Result<DepoissonizationReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let nf = n as f64;
    let sqrt_d = (dim as f64).sqrt();
    let rows = run_trials(
        trials,
        |t| trial_seed(seed, dim, nf, t),
        |_, s| {
            let (xf, yf) = trial_instance(dim, Mode::Fixed, nf, s)?;
            let (xp, yp) = trial_instance(dim, Mode::Poisson, nf, s)?;
            let lf = matching_length(&xf, &yf)?;
            let lp = matching_length(&xp, &yp)?;
            let slack = sqrt_d * (xp.len().abs_diff(n) + yp.len().abs_diff(n)) as f64;
            Ok((lf, lp, slack))
        },
    )?;
    let fixed: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pois: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (difference, difference_stderr) = mean_stderr(&diffs);
    let mut coupling_violations = 0;
    let mut max_coupling_ratio = 0.0f64;
    for &(lf, lp, slack) in &rows {
        let gap = (lf - lp).abs();
        if gap > slack + 1e-9 * lf.max(lp).max(1.0) {
            coupling_violations += 1;
        }
        if slack > 0.0 {
            max_coupling_ratio = max_coupling_ratio.max(gap / slack);
        }
    }
    let bound = 2.0 * (2.0 * dim as f64 * nf).sqrt();
    let mean_bound_holds = difference.abs() <= bound;
    Ok(DepoissonizationReport {
        dim,
        n,
        trials,
        fixed_mean: mean_stderr(&fixed).0,
        poisson_mean: mean_stderr(&pois).0,
        difference,
        difference_stderr,
        bound,
        mean_bound_holds,
        mean_bound_holds_within_stderr: difference.abs() <= bound + SIGMAS * difference_stderr,
        coupling_violations,
        max_coupling_ratio,
        holds: mean_bound_holds && coupling_violations == 0,
    })
}

/// Thresholds used when a concentration run does not specify its own.
pub const DEFAULT_T_GRID: [f64; 10] = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

/// `2 exp(-N^(1-2/d) t^2 / (8 d))`.
pub fn concentration_bound(dim: usize, n: f64, t: f64) -> f64 {
    let d = dim as f64;
    2.0 * (-n.powf(1.0 - 2.0 / d) * t * t / (8.0 * d)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    /// Empirical mean of `L / N^(1-1/d)`, the center of the tails.
    pub center: f64,
    pub t_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub tail_stderr: Vec<f64>,
    pub analytic_bound: Vec<f64>,
    pub holds_per_t: Vec<bool>,
    pub holds: bool,
}

/// Empirical tails of the normalized length against the exponential bound.
pub fn check_concentration(
    dim: usize,
    n: usize,
    trials: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<ConcentrationReport> {
    let est = estimate_mean(dim, Mode::Fixed, n as f64, trials, seed)?;
    concentration_from(&est, t_grid)
}

/// Same as [`check_concentration`] on lengths already sampled.
pub fn concentration_from(est: &MeanEstimate, t_grid: &[f64]) -> Result<ConcentrationReport> {
    if est.mode != Mode::Fixed {
        return Err(Error::InvalidArgument("concentration is checked at fixed N".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("t grid must be nonempty and positive".into()));
    }
    let n = est.n;
    let scale = if n > 0.0 {
        n.powf(1.0 - 1.0 / est.dim as f64)
    } else {
        1.0
    };
    let z: Vec<f64> = est.lengths.iter().map(|l| l / scale).collect();
    let center = mean_stderr(&z).0;
    let trials = z.len() as f64;
    let mut empirical_tail = Vec::with_capacity(t_grid.len());
    let mut tail_stderr = Vec::with_capacity(t_grid.len());
    let mut analytic_bound = Vec::with_capacity(t_grid.len());
    let mut holds_per_t = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let p = z.iter().filter(|v| (*v - center).abs() > t).count() as f64 / trials;
        let se = (p * (1.0 - p) / trials).sqrt();
        let b = concentration_bound(est.dim, n, t);
        empirical_tail.push(p);
        tail_stderr.push(se);
        analytic_bound.push(b);
        holds_per_t.push(p <= b + SIGMAS * se);
    }
    Ok(ConcentrationReport {
        dim: est.dim,
        n: n as usize,
        trials: est.trials,
        center,
        t_grid: t_grid.to_vec(),
        empirical_tail,
        tail_stderr,
        analytic_bound,
        holds: holds_per_t.iter().all(|&h| h),
        holds_per_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_evaluation() {
        let b = concentration_bound(3, 1000.0, 0.5);
        assert!((b - 2.0 * (-10.0f64 * 0.25 / 24.0).exp()).abs() < 1e-12);
        assert!((b - 1.802).abs() < 5e-4);
        assert!((concentration_bound(3, 1000.0, 5.0) - 5.9e-5).abs() < 1e-6);
        assert!((concentration_bound(3, 1000.0, 1e-9) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_lambda_discrepancy() {
        let r = check_poisson_discrepancy(0.01, 20_000, 5).unwrap();
        // E|n1 - n2| = 2 lambda + O(lambda^2)
        assert!((r.mean - 0.02).abs() < 3.0 * r.stderr + 1e-3, "{r:?}");
        assert!(r.holds);
        assert_eq!(r, check_poisson_discrepancy(0.01, 20_000, 5).unwrap());
        assert!(check_poisson_discrepancy(0.0, 10, 1).is_err());
    }

    #[test]
    fn subadditivity_with_m_one_is_trivial() {
        let r = check_mean_subadditivity(3, 50.0, 1, 8, 2).unwrap();
        assert_eq!(r.k, 0);
        assert_eq!(r.mean_n, r.mean_small);
        assert!(r.rhs > r.mean_n && r.holds);
    }

    #[test]
    fn boundary_term_formula() {
        let r = check_mean_subadditivity(3, 64.0, 2, 4, 2).unwrap();
        // K = 1: 2^3 sqrt(384) (1 + 2^(1/2))
        let expected = 8.0 * 384f64.sqrt() * (1.0 + 2f64.sqrt());
        assert!((r.boundary_term - expected).abs() < 1e-9);
        assert_eq!(r.n_small, 8.0);
    }

    #[test]
    fn concentration_tails_are_monotone() {
        let r = check_concentration(3, 40, 200, &DEFAULT_T_GRID, 3).unwrap();
        assert!(r.empirical_tail.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.empirical_tail.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(r.holds);
    }

    #[test]
    fn depoissonization_small() {
        let r = check_depoissonization(2, 30, 40, 4).unwrap();
        assert_eq!(r.coupling_violations, 0);
        assert!(r.max_coupling_ratio <= 1.0 + 1e-9);
        assert!(r.holds);
    }
}
