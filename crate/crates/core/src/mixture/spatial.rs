//! Static kd-tree for exact k-nearest-neighbor and fixed-radius queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct KdTree<'a> {
    dim: usize,
    points: &'a [f64],
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    /// `points` is a flat row-major array of `dim`-dimensional points.
    pub fn new(dim: usize, points: &'a [f64]) -> Self {
        assert!(dim > 0 && points.len() % dim == 0, "flat point array");
        let mut tree = Self {
            dim,
            points,
            order: (0..points.len() / dim).collect(),
        };
        let n = tree.order.len();
        tree.build(0, n, 0);
        tree
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = depth % self.dim;
        let mid = (lo + hi) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a * dim + axis].total_cmp(&points[b * dim + axis]).then(a.cmp(&b))
        });
        self.build(lo, mid, depth + 1);
        self.build(mid + 1, hi, depth + 1);
    }

    fn dist2(&self, i: usize, q: &[f64]) -> f64 {
        self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// The `k` nearest points to `query` as `(squared distance, index)`,
    /// ascending; ties broken by index. `exclude` removes one index.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, self.order.len(), 0, query, k, exclude, &mut heap);
        }
        let mut out: Vec<_> = heap.into_iter().map(|c| (c.dist2, c.index)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        q: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        if Some(node) != exclude {
            let cand = Candidate {
                dist2: self.dist2(node, q),
                index: node,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("non-empty heap") {
                heap.pop();
                heap.push(cand);
            }
        }
        let axis = depth % self.dim;
        let diff = q[axis] - self.coord(node, axis);
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn_rec(near.0, near.1, depth + 1, q, k, exclude, heap);
        if heap.len() < k || diff * diff <= heap.peek().expect("non-empty heap").dist2 {
            self.knn_rec(far.0, far.1, depth + 1, q, k, exclude, heap);
        }
    }

    /// Indices of all points within squared distance `r2` (inclusive), ascending.
    pub fn within(&self, query: &[f64], r2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_rec(0, self.order.len(), 0, query, r2, &mut out);
        out.sort_unstable();
        out
    }

    fn within_rec(&self, lo: usize, hi: usize, depth: usize, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        if self.dist2(node, q) <= r2 {
            out.push(node);
        }
        let axis = depth % self.dim;
        let diff = q[axis] - self.coord(node, axis);
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, depth + 1, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, depth + 1, q, r2, out);
        }
    }
}
