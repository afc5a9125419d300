//! Assignment problems with independent random costs in place of distances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run_trials, SIGMAS};
use crate::error::{Error, Result};
use crate::lap::assign_dense;
use crate::rng::{derive_seed, sample_exp1, stream_rng};
use crate::stats::mean_stderr;

/// Mean optimal costs must stay below this for the trend to count as bounded.
pub const RANDOM_LINK_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostDistribution {
    Uniform,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomLinkInstance {
    pub n1: usize,
    pub n2: usize,
    /// Row-major `n1 x n2` costs.
    pub costs: Vec<f64>,
    pub distribution: CostDistribution,
}

impl RandomLinkInstance {
    pub fn sample(n1: usize, n2: usize, distribution: CostDistribution, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let costs = (0..n1 * n2)
            .map(|_| match distribution {
                CostDistribution::Uniform => rng.random::<f64>(),
                CostDistribution::Exponential => sample_exp1(&mut rng),
            })
            .collect();
        Self {
            n1,
            n2,
            costs,
            distribution,
        }
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n2 + j]
    }

    /// Optimal assignment of `min(n1, n2)` pairs as `(row, col)` and its cost.
    pub fn solve(&self) -> (Vec<(usize, usize)>, f64) {
        let pairs: Vec<(usize, usize)> = if self.n1 <= self.n2 {
            assign_dense(self.n1, self.n2, |i, j| self.cost(i, j))
                .into_iter()
                .enumerate()
                .collect()
        } else {
            let mut p: Vec<(usize, usize)> = assign_dense(self.n2, self.n1, |j, i| self.cost(i, j))
                .into_iter()
                .enumerate()
                .map(|(j, i)| (i, j))
                .collect();
            p.sort_unstable();
            p
        };
        let total = pairs.iter().map(|&(i, j)| self.cost(i, j)).sum();
        (pairs, total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomLinkRow {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomLinkReport {
    pub distribution: CostDistribution,
    pub rows: Vec<RandomLinkRow>,
    /// Each mean exceeds the previous one, allowing three standard errors.
    pub increasing: bool,
    pub bounded: bool,
    pub holds: bool,
}

pub fn random_link_mean(n: usize, distribution: CostDistribution, trials: usize, seed: u64) -> Result<RandomLinkRow> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let costs = run_trials(
        trials,
        |t| derive_seed(seed, &[n as u64, t as u64]),
        |_, s| Ok(RandomLinkInstance::sample(n, n, distribution, s).solve().1),
    )?;
    let (mean, stderr) = mean_stderr(&costs);
    Ok(RandomLinkRow {
        n,
        trials,
        mean,
        stderr,
    })
}

pub fn random_link_compare(
    sizes: &[usize],
    distribution: CostDistribution,
    trials: usize,
    seed: u64,
) -> Result<RandomLinkReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sizes must be nonempty and strictly increasing".into(),
        ));
    }
    let rows = sizes
        .iter()
        .map(|&n| random_link_mean(n, distribution, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let increasing = rows.windows(2).all(|w| {
        let slack = SIGMAS * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].mean + slack > w[0].mean
    });
    let bounded = rows.iter().all(|r| r.mean < RANDOM_LINK_LIMIT);
    Ok(RandomLinkReport {
        distribution,
        rows,
        increasing,
        bounded,
        holds: increasing && bounded,
    })
}
