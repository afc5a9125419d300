//! Exact Euclidean assignment on a sparse candidate graph, certified against
//! the complete bipartite graph.
//!
//! The solver runs successive shortest augmenting paths with potentials on a
//! k-nearest-neighbour candidate graph (neighbours taken from both sides).
//! When every row is assigned, the duals are checked against all
//! `rows x cols` pairs (pruned with a kd-tree). Pairs with negative reduced
//! cost become candidate edges; square instances repair in place by freeing
//! the offending rows, rectangular ones restart on the enlarged graph. The
//! returned assignment is therefore optimal for the full cost matrix, not
//! only for the candidate graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::kdtree::KdTree;
use crate::points::{distance, PointCloud};

const NONE: u32 = u32::MAX;
/// Violating edges added per row and round; the rest wait for the next check.
const VIOLATIONS_PER_ROW: usize = 8;

fn neighbours(dim: usize) -> usize {
    // optimal edges are longer relative to the nearest-neighbour scale in
    // low dimension
    if dim <= 2 {
        32
    } else {
        16
    }
}
/// Reduced costs below `-DUAL_TOLERANCE` count as violations.
const DUAL_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub restarts: usize,
    pub widened_rows: usize,
    pub widened_cols: usize,
    pub added_edges: usize,
}

#[derive(Clone, Copy)]
struct Entry {
    dist: f64,
    col: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // min-heap on distance, ties on column index
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.col.cmp(&self.col))
    }
}

struct Solver<'a> {
    rows: &'a PointCloud,
    cols: &'a PointCloud,
    col_tree: KdTree<'a>,
    adj: Vec<Vec<(u32, f64)>>,
    /// how many nearest rows each column is currently linked to
    col_reach: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
    row_to: Vec<u32>,
    col_to: Vec<u32>,
    dist: Vec<f64>,
    pred: Vec<u32>,
    seen: Vec<u32>,
    done: Vec<u32>,
    epoch: u32,
    finalized: Vec<u32>,
    heap: BinaryHeap<Entry>,
    stats: SolveStats,
}

/// Optimal assignment of every row point to a distinct column point,
/// `rows.len() <= cols.len()`. Returns `row -> column`.
pub fn assign_points(rows: &PointCloud, cols: &PointCloud) -> Vec<usize> {
    assign_points_with_stats(rows, cols).0
}

pub fn assign_points_with_stats(rows: &PointCloud, cols: &PointCloud) -> (Vec<usize>, SolveStats) {
    assert!(rows.len() <= cols.len());
    assert_eq!(rows.dim(), cols.dim());
    if rows.is_empty() {
        return (Vec::new(), SolveStats::default());
    }
    let mut s = Solver::new(rows, cols);
    s.solve();
    let out = s.row_to.iter().map(|&j| j as usize).collect();
    (out, s.stats)
}

impl<'a> Solver<'a> {
    fn new(rows: &'a PointCloud, cols: &'a PointCloud) -> Self {
        let (n, m) = (rows.len(), cols.len());
        let col_tree = KdTree::new(cols);
        let adj = candidate_graph(rows, cols, &col_tree, neighbours(rows.dim()));
        Self {
            rows,
            cols,
            col_tree,
            adj,
            col_reach: vec![neighbours(rows.dim()); m],
            u: vec![0.0; n],
            v: vec![0.0; m],
            row_to: vec![NONE; n],
            col_to: vec![NONE; m],
            dist: vec![0.0; m],
            pred: vec![NONE; m],
            seen: vec![0; m],
            done: vec![0; m],
            epoch: 0,
            finalized: Vec::new(),
            heap: BinaryHeap::new(),
            stats: SolveStats::default(),
        }
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        distance(self.rows.point(i), self.cols.point(j))
    }

    fn solve(&mut self) {
        let square = self.rows.len() == self.cols.len();
        self.greedy_start();
        loop {
            for r in 0..self.rows.len() {
                if self.row_to[r] != NONE {
                    continue;
                }
                while !self.augment(r) {
                    if square {
                        self.widen_free_columns();
                    } else {
                        self.widen_row(r);
                    }
                }
            }
            let violations = self.dual_violations();
            if violations.is_empty() {
                return;
            }
            self.stats.restarts += 1;
            let mut touched = Vec::new();
            for (i, j, c) in self.worst_violations(violations) {
                if !self.adj[i].iter().any(|&(k, _)| k == j as u32) {
                    self.adj[i].push((j as u32, c));
                    self.stats.added_edges += 1;
                }
                touched.push(i);
            }
            if square {
                // every column ends up matched, so free columns carry no
                // potential constraint: free the offending rows and lower
                // their potentials until their candidate edges are feasible
                touched.dedup();
                for i in touched {
                    let j = self.row_to[i];
                    if j != NONE {
                        self.col_to[j as usize] = NONE;
                        self.row_to[i] = NONE;
                    }
                    self.u[i] = self.adj[i]
                        .iter()
                        .map(|&(j, c)| c - self.v[j as usize])
                        .fold(f64::INFINITY, f64::min);
                }
            } else {
                // free columns must keep the top potential, which freeing a
                // matched column would break; start over on the larger graph
                self.greedy_start();
            }
        }
    }

    fn greedy_start(&mut self) {
        self.v.fill(0.0);
        self.row_to.fill(NONE);
        self.col_to.fill(NONE);
        for i in 0..self.adj.len() {
            let (mut best, mut best_c) = (NONE, f64::INFINITY);
            for &(j, c) in &self.adj[i] {
                if c < best_c || (c == best_c && j < best) {
                    best = j;
                    best_c = c;
                }
            }
            self.u[i] = best_c;
            if best != NONE && self.col_to[best as usize] == NONE {
                self.row_to[i] = best;
                self.col_to[best as usize] = i as u32;
            }
        }
    }

    /// Grows the candidate list of free row `r` to four times its size
    /// (nearest columns first).
    fn widen_row(&mut self, r: usize) {
        self.stats.widened_rows += 1;
        let m = self.cols.len();
        let target = (4 * self.adj[r].len()).clamp(1, m);
        let p = self.rows.point(r);
        let mut all = Vec::new();
        self.col_tree.nearest(p, target, &mut all);
        let mut present = vec![false; m];
        for &(j, _) in &self.adj[r] {
            present[j as usize] = true;
        }
        for &(_, j) in &all {
            if !present[j as usize] {
                let c = self.cost(r, j as usize);
                self.adj[r].push((j, c));
            }
        }
        // r is free, so lowering its potential keeps every reduced cost >= 0
        let lowest = self.adj[r]
            .iter()
            .map(|&(j, c)| c - self.v[j as usize])
            .fold(f64::INFINITY, f64::min);
        self.u[r] = self.u[r].min(lowest);
    }

    /// Square case: links every free column to four times as many of its
    /// nearest rows. Free columns carry no potential constraint here, so
    /// lowering `v_j` restores nonnegative reduced costs on the new edges.
    fn widen_free_columns(&mut self) {
        let n = self.rows.len();
        let row_tree = KdTree::new(self.rows);
        let mut near = Vec::new();
        for j in 0..self.cols.len() {
            if self.col_to[j] != NONE {
                continue;
            }
            self.stats.widened_cols += 1;
            self.col_reach[j] = (4 * self.col_reach[j]).clamp(1, n);
            row_tree.nearest(self.cols.point(j), self.col_reach[j], &mut near);
            let mut lowest = self.v[j];
            for &(sq, i) in &near {
                let iu = i as usize;
                if !self.adj[iu].iter().any(|&(k, _)| k as usize == j) {
                    let c = sq.sqrt();
                    self.adj[iu].push((j as u32, c));
                    lowest = lowest.min(c - self.u[iu]);
                }
            }
            self.v[j] = lowest;
        }
    }

    fn relax(&mut self, j: u32, d: f64, from: u32) {
        let ju = j as usize;
        if self.done[ju] == self.epoch {
            return;
        }
        if self.seen[ju] != self.epoch || d < self.dist[ju] {
            self.seen[ju] = self.epoch;
            self.dist[ju] = d;
            self.pred[ju] = from;
            self.heap.push(Entry { dist: d, col: j });
        }
    }

    /// One Dijkstra from free row `r` to the nearest free column in reduced
    /// costs, followed by the potential update and the path flip.
    fn augment(&mut self, r: usize) -> bool {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.fill(0);
            self.done.fill(0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.finalized.clear();

        let ur = self.u[r];
        for k in 0..self.adj[r].len() {
            let (j, c) = self.adj[r][k];
            let d = c - ur - self.v[j as usize];
            self.relax(j, d, r as u32);
        }

        let (end, total) = loop {
            let Some(Entry { dist: d, col: j }) = self.heap.pop() else {
                return false;
            };
            let ju = j as usize;
            if self.done[ju] == self.epoch || d > self.dist[ju] {
                continue;
            }
            let i = self.col_to[ju];
            if i == NONE {
                break (ju, d);
            }
            self.done[ju] = self.epoch;
            self.finalized.push(j);
            let iu = i as usize;
            let ui = self.u[iu];
            for k in 0..self.adj[iu].len() {
                let (j2, c) = self.adj[iu][k];
                let nd = d + c - ui - self.v[j2 as usize];
                self.relax(j2, nd, i);
            }
        };

        for &j in &self.finalized {
            let ju = j as usize;
            let delta = total - self.dist[ju];
            self.v[ju] -= delta;
            self.u[self.col_to[ju] as usize] += delta;
        }
        self.u[r] += total;

        let mut j = end;
        loop {
            let i = self.pred[j] as usize;
            let next = self.row_to[i];
            self.row_to[i] = j as u32;
            self.col_to[j] = i as u32;
            if i == r {
                break;
            }
            j = next as usize;
        }
        true
    }

    /// Pairs whose reduced cost against the full matrix is negative. A
    /// violation needs `c < u_i + v_j`, so subtrees farther than
    /// `u_i + max v` are skipped.
    fn dual_violations(&self) -> Vec<(usize, usize, f64)> {
        let vmax = self.col_tree.node_max(&self.v);
        let mut out = Vec::new();
        for i in 0..self.rows.len() {
            let ui = self.u[i];
            self.col_tree.scan_within(self.rows.point(i), ui, &vmax, &mut |j, sq| {
                let t = ui + self.v[j];
                if t > 0.0 && sq < t * t {
                    let c = sq.sqrt();
                    if c - t < -DUAL_TOLERANCE {
                        out.push((i, j, c));
                    }
                }
            });
        }
        out
    }

    /// Keeps the most negative reduced costs of each row.
    fn worst_violations(&self, mut found: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
        let rc = |&(i, j, c): &(usize, usize, f64)| c - self.u[i] - self.v[j];
        found.sort_by(|a, b| a.0.cmp(&b.0).then(rc(a).total_cmp(&rc(b))).then(a.1.cmp(&b.1)));
        let mut kept = Vec::with_capacity(found.len());
        let mut run = 0;
        for (k, e) in found.iter().enumerate() {
            run = if k > 0 && found[k - 1].0 == e.0 { run + 1 } else { 0 };
            if run < VIOLATIONS_PER_ROW {
                kept.push(*e);
            }
        }
        kept
    }
}

/// Union of each row's `k` nearest columns and each column's `k` nearest
/// rows, as per-row adjacency lists sorted by column.
fn candidate_graph(rows: &PointCloud, cols: &PointCloud, col_tree: &KdTree, k: usize) -> Vec<Vec<(u32, f64)>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); rows.len()];
    let mut buf = Vec::new();
    for (i, p) in rows.iter().enumerate() {
        col_tree.nearest(p, k.min(cols.len()), &mut buf);
        adj[i].extend(buf.iter().map(|&(_, j)| j));
    }
    let row_tree = KdTree::new(rows);
    for (j, q) in cols.iter().enumerate() {
        row_tree.nearest(q, k.min(rows.len()), &mut buf);
        for &(_, i) in &buf {
            adj[i as usize].push(j as u32);
        }
    }
    adj.into_iter()
        .enumerate()
        .map(|(i, mut js)| {
            js.sort_unstable();
            js.dedup();
            js.into_iter()
                .map(|j| (j, distance(rows.point(i), cols.point(j as usize))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lap::assign_dense;
    use crate::points::{sample_pair, SampleSpec};

    fn cost_of(rows: &PointCloud, cols: &PointCloud, a: &[usize]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, &j)| distance(rows.point(i), cols.point(j)))
            .sum()
    }

    #[test]
    fn agrees_with_dense_solver() {
        for (seed, dim, n, m) in [
            (1, 2, 150, 150),
            (2, 3, 120, 180),
            (3, 1, 90, 100),
            (4, 5, 60, 60),
            (5, 2, 200, 230),
        ] {
            let (x, y) = sample_pair(&SampleSpec::fixed(dim, n, seed), &SampleSpec::fixed(dim, m, seed)).unwrap();
            let sparse = assign_points(&x, &y);
            let dense = assign_dense(n, m, |i, j| distance(x.point(i), y.point(j)));
            let mut cols = sparse.clone();
            cols.sort_unstable();
            cols.dedup();
            assert_eq!(cols.len(), n);
            let (a, b) = (cost_of(&x, &y, &sparse), cost_of(&x, &y, &dense));
            assert!((a - b).abs() < 1e-9, "seed {seed}: sparse {a} dense {b}");
        }
    }

    #[test]
    fn clustered_instance_forces_widening() {
        // rows packed in one corner, columns spread out: candidate lists are
        // heavily shared, so the sparse graph alone cannot match everything
        let n = 40;
        let rows: Vec<[f64; 2]> = (0..n).map(|i| [0.001 * i as f64, 0.0]).collect();
        let cols: Vec<[f64; 2]> = (0..n).map(|i| [1.0, i as f64 / n as f64]).collect();
        let x = PointCloud::from_points(2, &rows).unwrap();
        let y = PointCloud::from_points(2, &cols).unwrap();
        let (a, _) = assign_points_with_stats(&x, &y);
        let dense = assign_dense(n, n, |i, j| distance(x.point(i), y.point(j)));
        assert!((cost_of(&x, &y, &a) - cost_of(&x, &y, &dense)).abs() < 1e-9);
    }
}
