//! Recursive subdivision of the cube and the bottom-up matching built on it.
//!
//! Points are binned into the leaf cells of a `2^depth`-per-axis grid. Each
//! leaf is matched on its own, then level by level the points still unpaired
//! inside a parent cell are matched among themselves. After the merge in a
//! cell exactly `|n1 - n2|` of its points remain, and after the root only
//! `|N1 - N2|` points are unmatched overall. Comparing the construction with
//! the exact optimum and with the discrepancy bound
//!
//! ```text
//! L <= sum_leaves L_leaf + sum_{l=1..D} sqrt(d) * edge(l) * sum_{cells at l} |n1 - n2|
//! ```
//!
//! is what [`audit_decimation`] does per instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{solve_exact, Matching};
use crate::points::{distance, PointCloud};

/// Limit on `depth * dim`, so cell addresses fit in 30 bits.
pub const MAX_ADDRESS_BITS: u32 = 30;
/// Relative slack for floating-point comparisons in the inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// Geometry of a recursive subdivision: a root cube `[0, root_edge]^dim` split
/// in halves `depth` times. Leaf membership is `min(floor(x * leaf_scale),
/// leaf_max)` per axis, i.e. half-open cells with the top face of the unit
/// cube closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    pub dim: usize,
    pub depth: u32,
    pub root_edge: f64,
    leaf_scale: f64,
    leaf_max: u64,
}

impl Subdivision {
    /// The unit cube split `depth` times.
    pub fn dyadic(dim: usize, depth: u32) -> Result<Self> {
        check_depth(dim, depth)?;
        Ok(Self {
            dim,
            depth,
            root_edge: 1.0,
            leaf_scale: (1u64 << depth) as f64,
            leaf_max: (1u64 << depth) - 1,
        })
    }

    /// Leaves of edge `1/m` inside the padded cube `[0, 2^(K+1)/m]^dim` with
    /// `m = 2^K + r`, `0 <= r < 2^K`. Cells outside the unit cube stay empty.
    pub fn padded(dim: usize, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        let k = 63 - m.leading_zeros();
        let depth = k + 1;
        check_depth(dim, depth)?;
        Ok(Self {
            dim,
            depth,
            root_edge: (1u64 << depth) as f64 / m as f64,
            leaf_scale: m as f64,
            leaf_max: m - 1,
        })
    }

    /// The cube `[0, edge]^dim` split once into `2^dim` halves.
    pub fn single_split(dim: usize, edge: f64) -> Result<Self> {
        if !(edge.is_finite() && edge > 0.0) {
            return Err(Error::InvalidArgument(format!("edge must be positive, got {edge}")));
        }
        check_depth(dim, 1)?;
        Ok(Self {
            dim,
            depth: 1,
            root_edge: edge,
            leaf_scale: 2.0 / edge,
            leaf_max: 1,
        })
    }

    /// Edge length of the cells at `level` (0 is the root).
    pub fn edge(&self, level: u32) -> f64 {
        self.root_edge / (1u64 << level) as f64
    }

    pub fn diameter(&self, level: u32) -> f64 {
        (self.dim as f64).sqrt() * self.edge(level)
    }

    /// Leaf coordinates of a point; errors if it lies outside the root cube.
    fn leaf_coords(&self, p: &[f64], out: &mut [u64]) -> Result<()> {
        let limit = (1u64 << self.depth) - 1;
        for (k, &c) in p.iter().enumerate() {
            if !(0.0..=self.root_edge).contains(&c) {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {c} outside the root cube [0, {}]",
                    self.root_edge
                )));
            }
            out[k] = ((c * self.leaf_scale).floor() as u64).min(self.leaf_max).min(limit);
        }
        Ok(())
    }

    /// Address of the level-`level` cell containing leaf `coords`.
    pub fn address(&self, coords: &[u64], level: u32) -> u64 {
        let shift = self.depth - level;
        coords
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &c)| acc | ((c >> shift) << (level as usize * k)))
    }

    /// Address of the parent of a level-`level` cell.
    pub fn parent(&self, address: u64, level: u32) -> u64 {
        debug_assert!(level > 0);
        let mask = (1u64 << level) - 1;
        (0..self.dim).fold(0u64, |acc, k| {
            let c = (address >> (level as usize * k)) & mask;
            acc | ((c >> 1) << ((level - 1) as usize * k))
        })
    }

    /// Per-axis cell coordinates of an address at `level`.
    pub fn cell_coords(&self, address: u64, level: u32) -> Vec<u64> {
        let mask = (1u64 << level) - 1;
        (0..self.dim)
            .map(|k| (address >> (level as usize * k)) & mask)
            .collect()
    }
}

fn check_depth(dim: usize, depth: u32) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if (depth as u64) * (dim as u64) > MAX_ADDRESS_BITS as u64 {
        return Err(Error::DepthGuard {
            depth,
            dim,
            max: MAX_ADDRESS_BITS,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub n1: usize,
    pub n2: usize,
    pub discrepancy: usize,
}

impl CellStats {
    fn add(&mut self, n1: usize, n2: usize) {
        self.n1 += n1;
        self.n2 += n2;
        self.discrepancy = self.n1.abs_diff(self.n2);
    }
}

/// Per-level point counts of the nonempty cells. Empty cells are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicTree {
    pub subdivision: Subdivision,
    /// `levels[l]` maps cell address to counts; level 0 is the root.
    pub levels: Vec<BTreeMap<u64, CellStats>>,
}

impl DyadicTree {
    pub fn dim(&self) -> usize {
        self.subdivision.dim
    }

    pub fn depth(&self) -> u32 {
        self.subdivision.depth
    }

    pub fn root(&self) -> CellStats {
        self.levels[0].get(&0).copied().unwrap_or(CellStats {
            n1: 0,
            n2: 0,
            discrepancy: 0,
        })
    }

    /// `sum |n1 - n2|` over the cells of `level`.
    pub fn discrepancy_sum(&self, level: u32) -> usize {
        self.levels[level as usize].values().map(|c| c.discrepancy).sum()
    }

    pub fn cell(&self, level: u32, address: u64) -> CellStats {
        self.levels[level as usize].get(&address).copied().unwrap_or(CellStats {
            n1: 0,
            n2: 0,
            discrepancy: 0,
        })
    }

    /// Checks that children sum to their parents at every level.
    pub fn counts_consistent(&self) -> bool {
        for level in (1..=self.depth()).rev() {
            let mut sums: BTreeMap<u64, CellStats> = BTreeMap::new();
            for (&a, c) in &self.levels[level as usize] {
                sums.entry(self.subdivision.parent(a, level))
                    .or_insert(CellStats {
                        n1: 0,
                        n2: 0,
                        discrepancy: 0,
                    })
                    .add(c.n1, c.n2);
            }
            if sums != self.levels[level as usize - 1] {
                return false;
            }
        }
        true
    }
}

struct Binned {
    tree: DyadicTree,
    x_leaf: Vec<u64>,
    y_leaf: Vec<u64>,
}

fn bin(x: &PointCloud, y: &PointCloud, sub: &Subdivision) -> Result<Binned> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    if x.dim() != sub.dim {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: sub.dim,
        });
    }
    let depth = sub.depth;
    let mut coords = vec![0u64; sub.dim];
    let mut levels = vec![BTreeMap::new(); depth as usize + 1];
    let mut leaf_of = |cloud: &PointCloud, first: bool| -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(cloud.len());
        for p in cloud.iter() {
            sub.leaf_coords(p, &mut coords)?;
            for level in 0..=depth {
                let a = sub.address(&coords, level);
                levels[level as usize]
                    .entry(a)
                    .or_insert(CellStats {
                        n1: 0,
                        n2: 0,
                        discrepancy: 0,
                    })
                    .add(first as usize, !first as usize);
            }
            out.push(sub.address(&coords, depth));
        }
        Ok(out)
    };
    let x_leaf = leaf_of(x, true)?;
    let y_leaf = leaf_of(y, false)?;
    Ok(Binned {
        tree: DyadicTree {
            subdivision: *sub,
            levels,
        },
        x_leaf,
        y_leaf,
    })
}

/// Cell counts of the `depth`-fold dyadic subdivision of the unit cube.
pub fn build_tree(x: &PointCloud, y: &PointCloud, depth: u32) -> Result<DyadicTree> {
    let sub = Subdivision::dyadic(x.dim(), depth)?;
    Ok(bin(x, y, &sub)?.tree)
}

pub fn build_tree_with(x: &PointCloud, y: &PointCloud, sub: &Subdivision) -> Result<DyadicTree> {
    Ok(bin(x, y, sub)?.tree)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationResult {
    pub subdivision: Subdivision,
    /// Feasible matching from the construction; its length is the sum of the
    /// lengths reported by the solver at every step.
    pub matching: Matching,
    /// Total reported length of the leaf matchings.
    pub leaf_cost: f64,
    /// `per_level_cost[l]`: length added when merging leftovers inside the
    /// cells of level `l`, for `l < depth`.
    pub per_level_cost: Vec<f64>,
    /// `sum |n1 - n2|` over the cells of each level `0..=depth`.
    pub per_level_discrepancy_sum: Vec<usize>,
    /// Leftovers after each cell's step equalled that cell's discrepancy.
    pub leftover_law_holds: bool,
    /// Largest merge edge divided by the diameter of the cell it was made in.
    pub max_merge_edge_ratio: f64,
}

impl DecimationResult {
    pub fn total_length(&self) -> f64 {
        self.matching.total_length
    }

    /// `sum_{l=1..depth} sqrt(d) * edge(l) * sum_cells |n1 - n2|`.
    pub fn discrepancy_bound(&self) -> f64 {
        discrepancy_bound(&self.subdivision, &self.per_level_discrepancy_sum)
    }
}

fn discrepancy_bound(sub: &Subdivision, disc: &[usize]) -> f64 {
    (1..=sub.depth).map(|l| sub.diameter(l) * disc[l as usize] as f64).sum()
}

/// The bottom-up construction with `solver` used for every leaf and merge.
pub fn decimate<F>(x: &PointCloud, y: &PointCloud, sub: &Subdivision, solver: F) -> Result<DecimationResult>
where
    F: Fn(&PointCloud, &PointCloud) -> Result<Matching>,
{
    let binned = bin(x, y, sub)?;
    let tree = &binned.tree;
    let depth = sub.depth;

    // leftovers per cell of the level being processed
    let mut cells: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, &a) in binned.x_leaf.iter().enumerate() {
        cells.entry(a).or_default().0.push(i);
    }
    for (j, &a) in binned.y_leaf.iter().enumerate() {
        cells.entry(a).or_default().1.push(j);
    }

    let mut pairs = Vec::with_capacity(x.len().min(y.len()));
    let mut leaf_cost = 0.0;
    let mut per_level_cost = vec![0.0; depth as usize];
    let mut leftover_law_holds = true;
    let mut max_ratio = 0.0f64;

    let mut level = depth;
    loop {
        let mut level_cost = 0.0;
        let mut next: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (address, (xs, ys)) in cells {
            let (rest_x, rest_y, cost) = if xs.is_empty() || ys.is_empty() {
                (xs, ys, 0.0)
            } else {
                let m = solver(&x.subset(&xs), &y.subset(&ys))?;
                for &(a, b) in &m.pairs {
                    let (i, j) = (xs[a], ys[b]);
                    if level < depth {
                        let ratio = distance(x.point(i), y.point(j)) / sub.diameter(level);
                        max_ratio = max_ratio.max(ratio);
                    }
                    pairs.push((i, j));
                }
                let rest_x = m.unmatched_x.iter().map(|&a| xs[a]).collect::<Vec<_>>();
                let rest_y = m.unmatched_y.iter().map(|&b| ys[b]).collect::<Vec<_>>();
                (rest_x, rest_y, m.total_length)
            };
            level_cost += cost;
            if rest_x.len() + rest_y.len() != tree.cell(level, address).discrepancy {
                leftover_law_holds = false;
            }
            if level > 0 {
                let slot = next.entry(sub.parent(address, level)).or_default();
                slot.0.extend(rest_x);
                slot.1.extend(rest_y);
            } else {
                next.insert(address, (rest_x, rest_y));
            }
        }
        if level == depth {
            leaf_cost = level_cost;
        } else {
            per_level_cost[level as usize] = level_cost;
        }
        cells = next;
        if level == 0 {
            break;
        }
        level -= 1;
    }

    let (mut unmatched_x, mut unmatched_y) = cells.into_values().next().unwrap_or_default();
    unmatched_x.sort_unstable();
    unmatched_y.sort_unstable();
    pairs.sort_unstable();
    let total_length = leaf_cost + per_level_cost.iter().sum::<f64>();
    let matching = Matching {
        pairs,
        unmatched_x,
        unmatched_y,
        total_length,
    };
    Ok(DecimationResult {
        subdivision: *sub,
        matching,
        leaf_cost,
        per_level_cost,
        per_level_discrepancy_sum: (0..=depth).map(|l| tree.discrepancy_sum(l)).collect(),
        leftover_law_holds,
        max_merge_edge_ratio: max_ratio,
    })
}

/// Dyadic construction of the given depth with an arbitrary leaf solver.
pub fn decimation_match<F>(x: &PointCloud, y: &PointCloud, depth: u32, leaf_solver: F) -> Result<DecimationResult>
where
    F: Fn(&PointCloud, &PointCloud) -> Result<Matching>,
{
    let sub = Subdivision::dyadic(x.dim(), depth)?;
    decimate(x, y, &sub, leaf_solver)
}

/// Per-instance comparison of the construction with the exact optimum and
/// with the discrepancy bound. Leaf optima are recomputed with
/// [`solve_exact`] rather than taken from the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationAudit {
    pub exact_length: f64,
    pub heuristic_length: f64,
    pub leaf_optimum_sum: f64,
    pub upper_bound: f64,
    pub dominance_holds: bool,
    pub upper_bound_holds: bool,
    pub leftover_law_holds: bool,
    pub residue_holds: bool,
    pub edge_cap_holds: bool,
}

impl DecimationAudit {
    pub fn passed(&self) -> bool {
        self.dominance_holds
            && self.upper_bound_holds
            && self.leftover_law_holds
            && self.residue_holds
            && self.edge_cap_holds
    }
}

pub fn audit_decimation(x: &PointCloud, y: &PointCloud, result: &DecimationResult) -> Result<DecimationAudit> {
    let sub = &result.subdivision;
    let binned = bin(x, y, sub)?;
    let mut leaves: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, &a) in binned.x_leaf.iter().enumerate() {
        leaves.entry(a).or_default().0.push(i);
    }
    for (j, &a) in binned.y_leaf.iter().enumerate() {
        leaves.entry(a).or_default().1.push(j);
    }
    let mut leaf_optimum_sum = 0.0;
    for (xs, ys) in leaves.values() {
        if !xs.is_empty() && !ys.is_empty() {
            leaf_optimum_sum += solve_exact(&x.subset(xs), &y.subset(ys))?.total_length;
        }
    }
    let exact_length = solve_exact(x, y)?.total_length;
    let heuristic_length = result.total_length();
    let upper_bound = leaf_optimum_sum + result.discrepancy_bound();
    let residue = result.matching.unmatched_x.len() + result.matching.unmatched_y.len();
    Ok(DecimationAudit {
        exact_length,
        heuristic_length,
        leaf_optimum_sum,
        upper_bound,
        dominance_holds: le(exact_length, heuristic_length),
        upper_bound_holds: le(heuristic_length, upper_bound),
        leftover_law_holds: result.leftover_law_holds,
        residue_holds: residue == x.len().abs_diff(y.len()),
        edge_cap_holds: result.max_merge_edge_ratio <= 1.0 + CHECK_TOLERANCE,
    })
}

/// `a <= b` up to relative floating-point slack.
pub fn le(a: f64, b: f64) -> bool {
    a <= b + CHECK_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// One halving of a cube of edge `a` anchored at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSplitReport {
    pub edge: f64,
    pub exact_length: f64,
    /// `sum_p L_p` over the `2^d` halves.
    pub sub_sum: f64,
    /// Exact matching of the points left unpaired in the halves.
    pub leftover_length: f64,
    /// `sum_p |n1_p - n2_p|`.
    pub discrepancy_sum: usize,
    /// `sub_sum + leftover_length`.
    pub middle: f64,
    /// `sub_sum + a sqrt(d) / 2 * discrepancy_sum`.
    pub crude: f64,
    pub holds: bool,
}

pub fn verify_single_split(x: &PointCloud, y: &PointCloud, edge: f64) -> Result<SingleSplitReport> {
    let sub = Subdivision::single_split(x.dim(), edge)?;
    let r = decimate(x, y, &sub, solve_exact)?;
    let exact_length = solve_exact(x, y)?.total_length;
    let sub_sum = r.leaf_cost;
    let leftover_length = r.per_level_cost[0];
    let discrepancy_sum = r.per_level_discrepancy_sum[1];
    let middle = sub_sum + leftover_length;
    let crude = sub_sum + 0.5 * edge * (x.dim() as f64).sqrt() * discrepancy_sum as f64;
    Ok(SingleSplitReport {
        edge,
        exact_length,
        sub_sum,
        leftover_length,
        discrepancy_sum,
        middle,
        crude,
        holds: le(exact_length, middle) && le(middle, crude),
    })
}

/// The construction over `m^d` cells of edge `1/m` embedded in a dyadic
/// hierarchy of depth `K + 1`, `m = 2^K + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddedReport {
    pub m: u64,
    pub k: u32,
    pub r: u64,
    pub result: DecimationResult,
    pub exact_length: f64,
    /// `sum_k L_k` over the `m^d` cells.
    pub cell_sum: f64,
    /// `sum_{k=0..K} sqrt(d) 2^(K-k) / m * sum |n1 - n2|`.
    pub cell_bound: f64,
    /// The same sum with `sqrt(d) / 2^k` factors.
    pub dyadic_bound: f64,
    pub holds: bool,
}

pub fn padded_subdivision(x: &PointCloud, y: &PointCloud, m: u64) -> Result<PaddedReport> {
    let sub = Subdivision::padded(x.dim(), m)?;
    let result = decimate(x, y, &sub, solve_exact)?;
    let k = sub.depth - 1;
    let exact_length = solve_exact(x, y)?.total_length;
    let sqrt_d = (x.dim() as f64).sqrt();
    let disc = &result.per_level_discrepancy_sum;
    // level l of the padded tree holds the cells indexed p_0..p_{l-1}
    let cell_bound = result.discrepancy_bound();
    let dyadic_bound: f64 = (0..=k)
        .map(|kk| sqrt_d / (1u64 << kk) as f64 * disc[kk as usize + 1] as f64)
        .sum();
    let cell_sum = result.leaf_cost;
    let gap = result.total_length() - cell_sum;
    let holds = le(exact_length, result.total_length())
        && le(exact_length - cell_sum, cell_bound)
        && le(gap, cell_bound)
        && le(cell_bound, dyadic_bound);
    Ok(PaddedReport {
        m,
        k,
        r: m - (1u64 << k),
        result,
        exact_length,
        cell_sum,
        cell_bound,
        dyadic_bound,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{sample_pair, SampleSpec};

    fn pair(dim: usize, n1: usize, n2: usize, seed: u64) -> (PointCloud, PointCloud) {
        sample_pair(&SampleSpec::fixed(dim, n1, seed), &SampleSpec::fixed(dim, n2, seed)).unwrap()
    }

    #[test]
    fn root_only_tree() {
        let (x, y) = pair(2, 5, 3, 1);
        let t = build_tree(&x, &y, 0).unwrap();
        assert_eq!(t.levels.len(), 1);
        assert_eq!(
            t.root(),
            CellStats {
                n1: 5,
                n2: 3,
                discrepancy: 2
            }
        );
    }

    #[test]
    fn one_dimensional_placement() {
        let x = PointCloud::new(1, vec![0.25, 0.75]).unwrap();
        let y = PointCloud::new(1, vec![0.1]).unwrap();
        let t = build_tree(&x, &y, 1).unwrap();
        assert_eq!(
            t.cell(1, 0),
            CellStats {
                n1: 1,
                n2: 1,
                discrepancy: 0
            }
        );
        assert_eq!(
            t.cell(1, 1),
            CellStats {
                n1: 1,
                n2: 0,
                discrepancy: 1
            }
        );
    }

    #[test]
    fn boundary_convention() {
        // 0.5 goes up, 1.0 stays in the last cell
        let x = PointCloud::new(1, vec![0.5, 1.0, 0.0]).unwrap();
        let t = build_tree(&x, &PointCloud::empty(1), 2).unwrap();
        assert_eq!(t.cell(2, 2).n1, 1);
        assert_eq!(t.cell(2, 3).n1, 1);
        assert_eq!(t.cell(2, 0).n1, 1);
    }

    #[test]
    fn counts_sum_up_the_levels() {
        for (dim, depth) in [(1, 6), (2, 4), (3, 3), (5, 2)] {
            let (x, y) = pair(dim, 200, 170, 9);
            let t = build_tree(&x, &y, depth).unwrap();
            assert!(t.counts_consistent());
            assert_eq!(
                t.root(),
                CellStats {
                    n1: 200,
                    n2: 170,
                    discrepancy: 30
                }
            );
            for level in 0..=depth {
                assert!(t.levels[level as usize].len() <= 1usize << (level as usize * dim));
            }
        }
    }

    #[test]
    fn depth_guard() {
        let (x, y) = pair(3, 2, 2, 1);
        assert!(matches!(build_tree(&x, &y, 11), Err(Error::DepthGuard { .. })));
        assert!(build_tree(&x, &y, 10).is_ok());
    }

    #[test]
    fn parent_of_address() {
        let sub = Subdivision::dyadic(2, 3).unwrap();
        let leaf = [5u64, 2u64];
        for level in (1..=3).rev() {
            let a = sub.address(&leaf, level);
            assert_eq!(sub.parent(a, level), sub.address(&leaf, level - 1));
        }
        assert_eq!(sub.cell_coords(sub.address(&leaf, 3), 3), vec![5, 2]);
    }

    #[test]
    fn depth_zero_is_exact() {
        let (x, y) = pair(2, 20, 17, 4);
        let r = decimation_match(&x, &y, 0, solve_exact).unwrap();
        let e = solve_exact(&x, &y).unwrap();
        assert!((r.total_length() - e.total_length).abs() < 1e-12);
        assert!(r.per_level_cost.is_empty());
    }

    #[test]
    fn single_leaf_is_exact() {
        let xs: Vec<f64> = (0..10).map(|i| 0.01 + 0.005 * i as f64).collect();
        let ys: Vec<f64> = (0..8).map(|i| 0.02 + 0.004 * i as f64).collect();
        let x = PointCloud::new(2, xs).unwrap();
        let y = PointCloud::new(2, ys).unwrap();
        for depth in 0..4 {
            let r = decimation_match(&x, &y, depth, solve_exact).unwrap();
            let e = solve_exact(&x, &y).unwrap();
            assert!((r.total_length() - e.total_length).abs() < 1e-12);
            assert!(r.per_level_cost.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn construction_invariants() {
        for seed in 0..20 {
            let dim = 2 + (seed % 2) as usize;
            let (x, y) = pair(dim, 64, 57 + (seed % 10) as usize, seed);
            for depth in 1..=3 {
                let r = decimation_match(&x, &y, depth, solve_exact).unwrap();
                r.matching.validate(&x, &y).unwrap();
                let a = audit_decimation(&x, &y, &r).unwrap();
                assert!(a.passed(), "seed {seed} depth {depth}: {a:?}");
            }
        }
    }

    #[test]
    fn single_split_examples() {
        let e = PointCloud::empty(2);
        let r = verify_single_split(&e, &e, 1.0).unwrap();
        assert!(r.holds);
        assert_eq!((r.exact_length, r.middle, r.crude), (0.0, 0.0, 0.0));

        let x = PointCloud::new(2, vec![0.1, 0.1, 0.2, 0.3]).unwrap();
        let y = PointCloud::new(2, vec![0.3, 0.2, 0.05, 0.4, 0.4, 0.1]).unwrap();
        let r = verify_single_split(&x, &y, 1.0).unwrap();
        assert!((r.exact_length - r.sub_sum).abs() < 1e-12);
        assert_eq!(r.leftover_length, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn single_split_on_smaller_cube() {
        let x = PointCloud::new(1, vec![0.1, 0.4]).unwrap();
        let y = PointCloud::new(1, vec![0.3, 0.05]).unwrap();
        let r = verify_single_split(&x, &y, 0.5).unwrap();
        assert!(r.holds);
        assert!(verify_single_split(&x, &y, 0.35).is_err());
    }

    #[test]
    fn padded_m_one_is_exact() {
        let (x, y) = pair(2, 30, 28, 2);
        let p = padded_subdivision(&x, &y, 1).unwrap();
        assert!((p.result.total_length() - p.exact_length).abs() < 1e-12);
        assert!(p.holds);
        assert_eq!((p.k, p.r), (0, 0));
    }

    #[test]
    fn padded_power_of_two_matches_dyadic() {
        let (x, y) = pair(2, 40, 40, 6);
        for k in 1..=3u32 {
            let p = padded_subdivision(&x, &y, 1 << k).unwrap();
            let d = decimation_match(&x, &y, k, solve_exact).unwrap();
            assert!((p.result.total_length() - d.total_length()).abs() < 1e-12);
            assert!((p.cell_sum - d.leaf_cost).abs() < 1e-12);
            assert!(p.holds);
        }
    }

    #[test]
    fn padded_three() {
        for seed in 0..10 {
            let (x, y) = pair(2, 32, 32, seed);
            let p = padded_subdivision(&x, &y, 3).unwrap();
            assert_eq!((p.k, p.r), (1, 1));
            assert!(p.holds, "seed {seed}: {p:?}");
            // the padded cube is [0, 4/3]^2 and only cells with index < 3 are used
            let t = build_tree_with(&x, &y, &p.result.subdivision).unwrap();
            assert!(t.levels[2]
                .keys()
                .all(|&a| t.subdivision.cell_coords(a, 2).iter().all(|&c| c < 3)));
        }
    }
}
