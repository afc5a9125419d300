//! The minimum Euclidean bipartite matching functional, with the
//! unbalanced convention: when the clouds differ in size, exactly
//! `|n1 - n2|` points of the larger cloud stay unmatched and the length is
//! the sum over matched pairs only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::assign_points;
use crate::lap::assign_dense;
use crate::points::{distance, PointCloud};
use crate::stats::compensated_sum;

/// Below this many candidate pairs the dense solver is used.
const DENSE_PAIR_LIMIT: usize = 64 * 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(index into x, index into y)`, sorted by the x index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_x: Vec<usize>,
    pub unmatched_y: Vec<usize>,
    pub total_length: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            unmatched_x: Vec::new(),
            unmatched_y: Vec::new(),
            total_length: 0.0,
        }
    }

    /// Builds a matching from pairs, filling in the unmatched lists and the
    /// length. Pairs must reference valid, distinct indices.
    pub fn from_pairs(x: &PointCloud, y: &PointCloud, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let mut used_x = vec![false; x.len()];
        let mut used_y = vec![false; y.len()];
        for &(i, j) in &pairs {
            assert!(!used_x[i] && !used_y[j], "pair ({i}, {j}) reuses an index");
            used_x[i] = true;
            used_y[j] = true;
        }
        let unmatched_x = (0..x.len()).filter(|&i| !used_x[i]).collect();
        let unmatched_y = (0..y.len()).filter(|&j| !used_y[j]).collect();
        let total_length = pair_length(x, y, &pairs);
        Self {
            pairs,
            unmatched_x,
            unmatched_y,
            total_length,
        }
    }

    /// Sum of pair distances recomputed from the clouds.
    pub fn recomputed_length(&self, x: &PointCloud, y: &PointCloud) -> f64 {
        pair_length(x, y, &self.pairs)
    }

    /// Checks the structural invariants against the clouds it was built for.
    pub fn validate(&self, x: &PointCloud, y: &PointCloud) -> std::result::Result<(), String> {
        let (n1, n2) = (x.len(), y.len());
        if self.pairs.len() != n1.min(n2) {
            return Err(format!("{} pairs for {n1} x {n2} points", self.pairs.len()));
        }
        let mut seen_x = vec![false; n1];
        let mut seen_y = vec![false; n2];
        for &(i, j) in &self.pairs {
            if i >= n1 || j >= n2 {
                return Err(format!("pair ({i}, {j}) out of range"));
            }
            if std::mem::replace(&mut seen_x[i], true) || std::mem::replace(&mut seen_y[j], true) {
                return Err(format!("pair ({i}, {j}) reuses an index"));
            }
        }
        for &i in &self.unmatched_x {
            if i >= n1 || std::mem::replace(&mut seen_x[i], true) {
                return Err(format!("unmatched x index {i} invalid or matched"));
            }
        }
        for &j in &self.unmatched_y {
            if j >= n2 || std::mem::replace(&mut seen_y[j], true) {
                return Err(format!("unmatched y index {j} invalid or matched"));
            }
        }
        if seen_x.iter().any(|s| !s) || seen_y.iter().any(|s| !s) {
            return Err("some point is neither matched nor listed unmatched".into());
        }
        let recomputed = self.recomputed_length(x, y);
        if (recomputed - self.total_length).abs() > 1e-12 * recomputed.max(1.0) {
            return Err(format!(
                "total_length {} but pairs sum to {recomputed}",
                self.total_length
            ));
        }
        Ok(())
    }
}

fn pair_length(x: &PointCloud, y: &PointCloud, pairs: &[(usize, usize)]) -> f64 {
    compensated_sum(pairs.iter().map(|&(i, j)| distance(x.point(i), y.point(j))))
}

fn check_dims(x: &PointCloud, y: &PointCloud) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

/// Minimum-length matching of cardinality `min(n1, n2)`.
pub fn solve_exact(x: &PointCloud, y: &PointCloud) -> Result<Matching> {
    check_dims(x, y)?;
    let swap = x.len() > y.len();
    let (rows, cols) = if swap { (y, x) } else { (x, y) };
    let assignment = if rows.len() * cols.len() <= DENSE_PAIR_LIMIT {
        assign_dense(rows.len(), cols.len(), |i, j| distance(rows.point(i), cols.point(j)))
    } else {
        assign_points(rows, cols)
    };
    let pairs = assignment
        .into_iter()
        .enumerate()
        .map(|(r, c)| if swap { (c, r) } else { (r, c) })
        .collect();
    Ok(Matching::from_pairs(x, y, pairs))
}

/// Length of [`solve_exact`]'s matching.
pub fn exact_length(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    Ok(solve_exact(x, y)?.total_length)
}

pub const BRUTE_FORCE_MAX_SMALL: usize = 8;
pub const BRUTE_FORCE_MAX_INJECTIONS: u64 = 200_000_000;

/// Exhaustive search over all injections of the smaller cloud into the
/// larger. Validation oracle only.
pub fn brute_force(x: &PointCloud, y: &PointCloud) -> Result<Matching> {
    check_dims(x, y)?;
    let swap = x.len() > y.len();
    let (small, large) = if swap { (y, x) } else { (x, y) };
    let (s, l) = (small.len(), large.len());
    let injections = (0..s).try_fold(1u64, |acc, k| acc.checked_mul((l - k) as u64));
    if s > BRUTE_FORCE_MAX_SMALL || injections.is_none_or(|n| n > BRUTE_FORCE_MAX_INJECTIONS) {
        return Err(Error::BruteForceGuard {
            n1: x.len(),
            n2: y.len(),
            max_small: BRUTE_FORCE_MAX_SMALL,
            max_injections: BRUTE_FORCE_MAX_INJECTIONS,
        });
    }
    let cost: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..l).map(|j| distance(small.point(i), large.point(j))).collect())
        .collect();

    struct Search<'c> {
        cost: &'c [Vec<f64>],
        used: Vec<bool>,
        current: Vec<usize>,
        best: Vec<usize>,
        best_cost: f64,
    }
    impl Search<'_> {
        fn go(&mut self, row: usize, acc: f64) {
            if acc >= self.best_cost {
                return;
            }
            if row == self.cost.len() {
                self.best_cost = acc;
                self.best.clone_from(&self.current);
                return;
            }
            for j in 0..self.used.len() {
                if !self.used[j] {
                    self.used[j] = true;
                    self.current.push(j);
                    self.go(row + 1, acc + self.cost[row][j]);
                    self.current.pop();
                    self.used[j] = false;
                }
            }
        }
    }
    let mut search = Search {
        cost: &cost,
        used: vec![false; l],
        current: Vec::with_capacity(s),
        best: Vec::new(),
        best_cost: f64::INFINITY,
    };
    search.go(0, 0.0);
    let pairs = search
        .best
        .into_iter()
        .enumerate()
        .map(|(r, c)| if swap { (c, r) } else { (r, c) })
        .collect();
    Ok(Matching::from_pairs(x, y, pairs))
}

/// Pairs the i-th smallest x with the i-th smallest y. Optimal for balanced
/// one-dimensional instances.
pub fn sorted_match_1d(x: &PointCloud, y: &PointCloud) -> Result<Matching> {
    if x.dim() != 1 || y.dim() != 1 || x.len() != y.len() {
        return Err(Error::NotSortable {
            dim: x.dim().max(y.dim()),
            n1: x.len(),
            n2: y.len(),
        });
    }
    let order = |c: &PointCloud| {
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c.coords()[a].total_cmp(&c.coords()[b]).then(a.cmp(&b)));
        idx
    };
    let pairs = order(x).into_iter().zip(order(y)).collect();
    Ok(Matching::from_pairs(x, y, pairs))
}
