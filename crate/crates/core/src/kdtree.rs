//! Static kd-tree over a point cloud with bounding boxes, used for nearest
//! neighbour candidate lists and for pruned scans in the dual check.

use std::collections::BinaryHeap;

use crate::points::{squared_distance, PointCloud};

const LEAF_SIZE: usize = 8;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

pub(crate) struct KdTree<'a> {
    cloud: &'a PointCloud,
    /// point indices in tree order; every node owns a contiguous range
    order: Vec<u32>,
    nodes: Vec<Node>,
    /// per node `[min_0..min_d, max_0..max_d]`
    boxes: Vec<f64>,
}

impl<'a> KdTree<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        let mut tree = Self {
            cloud,
            order: (0..cloud.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * cloud.len() / LEAF_SIZE + 1),
            boxes: Vec::new(),
        };
        if !cloud.is_empty() {
            tree.build(0, cloud.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let d = self.cloud.dim();
        let id = self.nodes.len();
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (k, &c) in self.cloud.point(i as usize).iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        if end - start > LEAF_SIZE {
            let axis = (0..d)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            let cloud = self.cloud;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                cloud.point(a as usize)[axis]
                    .total_cmp(&cloud.point(b as usize)[axis])
                    .then(a.cmp(&b))
            });
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            self.nodes[id].left = left;
            self.nodes[id].right = right;
        }
        id as u32
    }

    fn box_sqdist(&self, node: usize, p: &[f64]) -> f64 {
        let d = p.len();
        let b = &self.boxes[2 * d * node..2 * d * (node + 1)];
        let mut s = 0.0;
        for k in 0..d {
            let e = if p[k] < b[k] {
                b[k] - p[k]
            } else if p[k] > b[d + k] {
                p[k] - b[d + k]
            } else {
                0.0
            };
            s += e * e;
        }
        s
    }

    /// The `k` nearest points to `p` as `(squared distance, index)`,
    /// unordered.
    pub fn nearest(&self, p: &[f64], k: usize, out: &mut Vec<(f64, u32)>) {
        out.clear();
        if k == 0 || self.nodes.is_empty() {
            return;
        }
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.nearest_in(0, p, k, &mut best);
        out.extend(best.into_iter().map(|c| (c.sq, c.idx)));
    }

    fn nearest_in(&self, node: usize, p: &[f64], k: usize, best: &mut BinaryHeap<Candidate>) {
        let n = self.nodes[node];
        if n.left == NO_CHILD {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let sq = squared_distance(p, self.cloud.point(i as usize));
                let c = Candidate { sq, idx: i };
                if best.len() < k {
                    best.push(c);
                } else if c < *best.peek().unwrap() {
                    best.pop();
                    best.push(c);
                }
            }
            return;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        let (dl, dr) = (self.box_sqdist(l, p), self.box_sqdist(r, p));
        let (first, df, second, ds) = if dl <= dr { (l, dl, r, dr) } else { (r, dr, l, dl) };
        if best.len() < k || df < best.peek().unwrap().sq {
            self.nearest_in(first, p, k, best);
        }
        if best.len() < k || ds < best.peek().unwrap().sq {
            self.nearest_in(second, p, k, best);
        }
    }

    /// Per-node maximum of `value` over the node's points.
    pub fn node_max(&self, value: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.nodes.len()];
        // children always have larger ids than their parent
        for id in (0..self.nodes.len()).rev() {
            let n = self.nodes[id];
            out[id] = if n.left == NO_CHILD {
                self.order[n.start as usize..n.end as usize]
                    .iter()
                    .map(|&i| value[i as usize])
                    .fold(f64::NEG_INFINITY, f64::max)
            } else {
                out[n.left as usize].max(out[n.right as usize])
            };
        }
        out
    }

    /// Calls `visit(index, squared distance)` for every point that may lie
    /// closer to `p` than `offset + node_bound[node]`; whole subtrees whose
    /// box is at least that far are skipped.
    pub fn scan_within<F: FnMut(usize, f64)>(&self, p: &[f64], offset: f64, node_bound: &[f64], visit: &mut F) {
        if !self.nodes.is_empty() {
            self.scan_in(0, p, offset, node_bound, visit);
        }
    }

    fn scan_in<F: FnMut(usize, f64)>(&self, node: usize, p: &[f64], offset: f64, bound: &[f64], visit: &mut F) {
        let r = offset + bound[node];
        if r <= 0.0 || self.box_sqdist(node, p) >= r * r {
            return;
        }
        let n = self.nodes[node];
        if n.left == NO_CHILD {
            for &i in &self.order[n.start as usize..n.end as usize] {
                visit(i as usize, squared_distance(p, self.cloud.point(i as usize)));
            }
        } else {
            self.scan_in(n.left as usize, p, offset, bound, visit);
            self.scan_in(n.right as usize, p, offset, bound, visit);
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    sq: f64,
    idx: u32,
}

impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sq.total_cmp(&other.sq).then(self.idx.cmp(&other.idx))
    }
}
