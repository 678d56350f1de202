//! Point storage and exact nearest-neighbor / radius queries.
//!
//! Every query is exact: results are identical to a brute-force scan over
//! all points, ties included. The index is immutable after construction and
//! safe to query from multiple threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `n` points in ambient dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    dim: usize,
}

impl PointCloud {
    /// Builds a cloud from row vectors. All rows must share one dimension and
    /// every coordinate must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// Builds a cloud from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have dimension >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "flat buffer of length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate at point {}, axis {}",
                pos / dim,
                pos % dim
            )));
        }
        let n = data.len() / dim;
        Ok(Self { data, n, dim })
    }

    /// A cloud with zero points. Only useful as a parse result or as the
    /// empty side of a Hausdorff computation; indexes cannot be built on it.
    pub fn empty(dim: usize) -> Self {
        Self { data: Vec::new(), n: 0, dim }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Sub-cloud with the given point ids, in the given order.
    pub fn select(&self, ids: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            data.extend_from_slice(self.point(i));
        }
        if ids.is_empty() {
            return Ok(Self::empty(self.dim));
        }
        Self::from_flat(data, self.dim)
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    match a.len() {
        1 => {
            let d = a[0] - b[0];
            d * d
        }
        2 => {
            let d0 = a[0] - b[0];
            let d1 = a[1] - b[1];
            d0 * d0 + d1 * d1
        }
        3 => {
            let d0 = a[0] - b[0];
            let d1 = a[1] - b[1];
            let d2 = a[2] - b[2];
            d0 * d0 + d1 * d1 + d2 * d2
        }
        _ => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

/// Euclidean distance between two coordinate slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

const LEAF_SIZE: usize = 24;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Branch { axis: u32, split: f64, left: u32, right: u32 },
}

/// An exact kd-tree over an immutable [`PointCloud`].
///
/// Large-`k` order-statistic queries bypass the tree and run a flat scan with
/// selection, which is faster once the k-ball covers a sizable fraction of
/// the data. Both paths compute the same per-pair distances, so results are
/// bit-identical.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    cloud: PointCloud,
    nodes: Vec<Node>,
    perm: Vec<u32>,
}

impl NeighborIndex {
    /// Builds the index, taking ownership of the cloud.
    pub fn build(cloud: PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = cloud.n();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 2);
        build_node(&cloud, &mut perm, 0, n, &mut nodes);
        Ok(Self { cloud, nodes, perm })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn n(&self) -> usize {
        self.cloud.n()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "query has dimension {}, index has {}",
                q.len(),
                self.dim()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("query has non-finite coordinates".into()));
        }
        Ok(())
    }

    /// Distance from `q` to its k-th nearest sample point (self counts when
    /// `q` coincides with a sample). This is the k-th smallest element of the
    /// multiset of all n distances.
    pub fn kth_neighbor_distance(&self, q: &[f64], k: usize) -> Result<f64> {
        Ok(*self.k_smallest_distances(q, k)?.last().unwrap())
    }

    /// The k smallest distances from `q` to the samples, ascending.
    pub fn k_smallest_distances(&self, q: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_query(q)?;
        let n = self.n();
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if k > n {
            return Err(Error::KTooLarge { k, n });
        }
        let mut d2 = if self.use_flat_path(k) {
            let mut all: Vec<f64> = self.cloud.iter().map(|p| dist2(q, p)).collect();
            all.select_nth_unstable_by(k - 1, f64::total_cmp);
            all.truncate(k);
            all
        } else {
            let mut heap = BoundedMaxHeap::new(k);
            self.knn_visit(0, q, &mut heap);
            heap.into_vec()
        };
        d2.sort_unstable_by(f64::total_cmp);
        for v in &mut d2 {
            *v = v.sqrt();
        }
        Ok(d2)
    }

    #[inline]
    fn use_flat_path(&self, k: usize) -> bool {
        let n = self.n();
        n <= 2 * LEAF_SIZE || k >= n / 8
    }

    fn knn_visit(&self, node: u32, q: &[f64], heap: &mut BoundedMaxHeap) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &id in &self.perm[*start as usize..*end as usize] {
                    heap.push(dist2(q, self.cloud.point(id as usize)));
                }
            }
            Node::Branch { axis, split, left, right } => {
                let delta = q[*axis as usize] - split;
                let (near, far) = if delta <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.knn_visit(near, q, heap);
                if !heap.full() || delta * delta < heap.top() {
                    self.knn_visit(far, q, heap);
                }
            }
        }
    }

    /// Ids of all samples within closed distance `eps` of `q`, ascending.
    pub fn radius_neighbors(&self, q: &[f64], eps: f64) -> Result<Vec<usize>> {
        self.check_query(q)?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidRadius(eps));
        }
        let mut out = Vec::new();
        self.radius_visit(0, q, eps, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    fn radius_visit(&self, node: u32, q: &[f64], eps: f64, out: &mut Vec<usize>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &id in &self.perm[*start as usize..*end as usize] {
                    if dist2(q, self.cloud.point(id as usize)).sqrt() <= eps {
                        out.push(id as usize);
                    }
                }
            }
            Node::Branch { axis, split, left, right } => {
                let delta = q[*axis as usize] - split;
                let (near, far) = if delta <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.radius_visit(near, q, eps, out);
                if delta.abs() <= eps {
                    self.radius_visit(far, q, eps, out);
                }
            }
        }
    }

    /// Distance from `q` to the nearest sample.
    pub fn nearest_distance(&self, q: &[f64]) -> Result<f64> {
        self.kth_neighbor_distance(q, 1)
    }

    /// Calls `f(id, distance)` for every sample within closed distance `eps`
    /// of `q`, in traversal order. Avoids materializing the id list; callers
    /// that need determinism must reduce order-independently.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], eps: f64, f: &mut F) -> Result<()> {
        self.check_query(q)?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidRadius(eps));
        }
        self.within_visit(0, q, eps, f);
        Ok(())
    }

    fn within_visit<F: FnMut(usize, f64)>(&self, node: u32, q: &[f64], eps: f64, f: &mut F) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &id in &self.perm[*start as usize..*end as usize] {
                    let d = dist2(q, self.cloud.point(id as usize)).sqrt();
                    if d <= eps {
                        f(id as usize, d);
                    }
                }
            }
            Node::Branch { axis, split, left, right } => {
                let delta = q[*axis as usize] - split;
                let (near, far) = if delta <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.within_visit(near, q, eps, f);
                if delta.abs() <= eps {
                    self.within_visit(far, q, eps, f);
                }
            }
        }
    }

    /// r_k at every sample point, in id order. Parallel over points.
    pub fn all_kth_neighbor_distances(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if k > n {
            return Err(Error::KTooLarge { k, n });
        }
        if self.use_flat_path(k) {
            let flat = self.cloud.as_flat();
            let dim = self.dim();
            let out: Vec<f64> = (0..n)
                .into_par_iter()
                .map_init(
                    || Vec::with_capacity(n),
                    |buf, i| {
                        let q = &flat[i * dim..(i + 1) * dim];
                        buf.clear();
                        buf.extend(flat.chunks_exact(dim).map(|p| dist2(q, p)));
                        buf.select_nth_unstable_by(k - 1, f64::total_cmp);
                        buf[k - 1].sqrt()
                    },
                )
                .collect();
            Ok(out)
        } else {
            (0..n)
                .into_par_iter()
                .map(|i| self.kth_neighbor_distance(self.cloud.point(i), k))
                .collect()
        }
    }
}

fn build_node(cloud: &PointCloud, perm: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
        return id;
    }
    // Split on the axis of largest spread at the median coordinate.
    let dim = cloud.dim();
    let mut best_axis = 0;
    let mut best_spread = -1.0;
    for axis in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in &perm[start..end] {
            let v = cloud.point(p as usize)[axis];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_axis = axis;
        }
    }
    if best_spread == 0.0 {
        // All points identical on every axis.
        nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
        return id;
    }
    let mid = (start + end) / 2;
    perm[start..end].sort_unstable_by(|&a, &b| {
        cloud.point(a as usize)[best_axis].total_cmp(&cloud.point(b as usize)[best_axis])
    });
    let split = cloud.point(perm[mid] as usize)[best_axis];
    nodes.push(Node::Branch { axis: best_axis as u32, split, left: 0, right: 0 });
    let left = build_node(cloud, perm, start, mid, nodes);
    let right = build_node(cloud, perm, mid, end, nodes);
    if let Node::Branch { left: l, right: r, .. } = &mut nodes[id as usize] {
        *l = left;
        *r = right;
    }
    id
}

/// Fixed-capacity max-heap over f64 (no NaNs by construction).
struct BoundedMaxHeap {
    cap: usize,
    data: Vec<f64>,
}

impl BoundedMaxHeap {
    fn new(cap: usize) -> Self {
        Self { cap, data: Vec::with_capacity(cap) }
    }

    #[inline]
    fn full(&self) -> bool {
        self.data.len() == self.cap
    }

    #[inline]
    fn top(&self) -> f64 {
        self.data[0]
    }

    #[inline]
    fn push(&mut self, v: f64) {
        if self.data.len() < self.cap {
            self.data.push(v);
            let mut i = self.data.len() - 1;
            while i > 0 {
                let parent = (i - 1) / 2;
                if self.data[parent] < self.data[i] {
                    self.data.swap(parent, i);
                    i = parent;
                } else {
                    break;
                }
            }
        } else if v < self.data[0] {
            self.data[0] = v;
            let mut i = 0;
            loop {
                let (l, r) = (2 * i + 1, 2 * i + 2);
                let mut largest = i;
                if l < self.data.len() && self.data[l] > self.data[largest] {
                    largest = l;
                }
                if r < self.data.len() && self.data[r] > self.data[largest] {
                    largest = r;
                }
                if largest == i {
                    break;
                }
                self.data.swap(i, largest);
                i = largest;
            }
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.data
    }
}
