//! The eps-neighborhood level graph, its connected components, and the
//! DBSCAN clustering built on them.
//!
//! A point is a vertex of G(k, eps) exactly when its k-NN radius is at most
//! eps, which is the same as being a DBSCAN core point for minPts = k. Every
//! DBSCAN cluster is one component K of G(minPts, eps) plus the border
//! points it absorbs, and satisfies K ⊆ C ⊆ ∪_{x∈K} B(x, eps) ∩ X.

use crate::error::{Error, Result};
use crate::geometry::{euclidean, NeighborIndex};
use crate::union_find::UnionFind;

/// Label value for points assigned to no cluster.
pub const NOISE: i64 = -1;

/// Vertex set of G(k, eps). Edges are implicit: two vertices are adjacent
/// iff their distance is at most eps.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    /// Vertex ids, ascending.
    pub vertices: Vec<usize>,
    pub k: usize,
    pub eps: f64,
}

/// A DBSCAN clustering. Cluster ids are contiguous `0..m` and ordered by the
/// smallest member point id; noise points carry [`NOISE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<i64>,
    pub core: Vec<bool>,
    pub min_pts: usize,
    pub eps: f64,
}

impl Clustering {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| if m < 0 { 0 } else { m as usize + 1 })
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Member ids of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c as i64)
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_params(index: &NeighborIndex, k: usize, eps: f64) -> Result<()> {
    let n = index.n();
    if k == 0 {
        return Err(Error::InvalidArgument("min_pts/k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidRadius(eps));
    }
    Ok(())
}

/// Vertices of G(k, eps): exactly the ids with r_k <= eps (closed condition).
pub fn build_level_graph(index: &NeighborIndex, k: usize, eps: f64) -> Result<LevelGraph> {
    check_params(index, k, eps)?;
    let radii = index.all_kth_neighbor_distances(k)?;
    let vertices = radii
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= eps)
        .map(|(i, _)| i)
        .collect();
    Ok(LevelGraph { vertices, k, eps })
}

/// Component label per vertex position. Two vertices share a label iff they
/// are joined by a path of edges of length <= eps. Labels are contiguous and
/// ordered by the smallest member id.
pub fn connected_components(graph: &LevelGraph, index: &NeighborIndex) -> Result<Vec<usize>> {
    let n = index.n();
    let mut vertex_pos = vec![usize::MAX; n];
    for (pos, &v) in graph.vertices.iter().enumerate() {
        vertex_pos[v] = pos;
    }
    let mut uf = UnionFind::new(graph.vertices.len());
    for (pos, &v) in graph.vertices.iter().enumerate() {
        for j in index.radius_neighbors(index.cloud().point(v), graph.eps)? {
            let jpos = vertex_pos[j];
            if jpos != usize::MAX {
                uf.union(pos, jpos);
            }
        }
    }
    let mut labels = vec![0usize; graph.vertices.len()];
    let mut next = 0usize;
    let mut root_label = vec![usize::MAX; graph.vertices.len()];
    for pos in 0..graph.vertices.len() {
        let root = uf.find(pos);
        if root_label[root] == usize::MAX {
            root_label[root] = next;
            next += 1;
        }
        labels[pos] = root_label[root];
    }
    Ok(labels)
}

/// Full DBSCAN clustering: components of G(min_pts, eps) augmented with
/// border points. A border point reachable from several components goes to
/// the component of its nearest core point, with exact distance ties broken
/// by the smallest core-point id.
pub fn dbscan_cluster(index: &NeighborIndex, min_pts: usize, eps: f64) -> Result<Clustering> {
    let graph = build_level_graph(index, min_pts, eps)?;
    let comp = connected_components(&graph, index)?;
    let n = index.n();
    let mut labels = vec![NOISE; n];
    let mut core = vec![false; n];
    for (pos, &v) in graph.vertices.iter().enumerate() {
        core[v] = true;
        labels[v] = comp[pos] as i64;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in index.radius_neighbors(index.cloud().point(i), eps)? {
            if !core[j] {
                continue;
            }
            let d = euclidean(index.cloud().point(i), index.cloud().point(j));
            // Neighbors come back in ascending id order, so strict `<` keeps
            // the smallest core id among exact ties.
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if let Some((_, j)) = best {
            labels[i] = labels[j];
        }
    }
    renumber_by_smallest_member(&mut labels);
    Ok(Clustering { labels, core, min_pts, eps })
}

/// Renumbers non-noise labels to contiguous ids ordered by the smallest
/// member point id.
pub(crate) fn renumber_by_smallest_member(labels: &mut [i64]) {
    let max = labels.iter().copied().max().unwrap_or(-1);
    if max < 0 {
        return;
    }
    let mut remap = vec![i64::MIN; max as usize + 1];
    let mut next = 0i64;
    for l in labels.iter_mut() {
        if *l == NOISE {
            continue;
        }
        if remap[*l as usize] == i64::MIN {
            remap[*l as usize] = next;
            next += 1;
        }
        *l = remap[*l as usize];
    }
}
