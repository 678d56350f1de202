//! False-cluster removal: a second DBSCAN run at the larger radius
//! eps-tilde, merging first-run clusters that land in the same second-run
//! cluster.
//!
//! Subset testing happens on core points only. Every eps-core point is an
//! eps-tilde-core point and components only merge as the radius grows, so
//! the containment is deterministic; border assignments differ between the
//! two runs by construction and are recomputed against the merged cores at
//! the first-run radius (which reduces to relabeling, since the core set and
//! the nearest-core rule are unchanged by merging).

use crate::dbscan::{dbscan_cluster, renumber_by_smallest_member, Clustering, NOISE};
use crate::error::{Error, Result};
use crate::geometry::NeighborIndex;

/// Output of the removal pass.
#[derive(Debug, Clone)]
pub struct PrunedClustering {
    /// Final labels; same shape contract as any [`Clustering`].
    pub clustering: Clustering,
    /// Original cluster id -> merged cluster id.
    pub merge_map: Vec<usize>,
    pub eps: f64,
    pub eps_tilde: f64,
}

impl PrunedClustering {
    pub fn n_merged(&self) -> usize {
        self.clustering.n_clusters()
    }
}

/// Runs DBSCAN at `eps` and at `eps_tilde >= eps` and unions first-run
/// clusters whose cores share a second-run cluster. Noise is unchanged.
pub fn prune_false_clusters(
    index: &NeighborIndex,
    k: usize,
    eps: f64,
    eps_tilde: f64,
) -> Result<PrunedClustering> {
    if eps_tilde < eps {
        return Err(Error::EpsOrderViolation { eps, eps_tilde });
    }
    let first = dbscan_cluster(index, k, eps)?;
    let second = dbscan_cluster(index, k, eps_tilde)?;
    let (labels, merge_map) = merge_by_containment(&first, &second)?;
    Ok(PrunedClustering {
        clustering: Clustering { labels, core: first.core, min_pts: k, eps },
        merge_map,
        eps,
        eps_tilde,
    })
}

/// The merge step alone: unions `fine` clusters whose core points share a
/// `coarse` cluster. Returns the merged labels and the fine-id -> merged-id
/// map.
pub fn merge_by_containment(fine: &Clustering, coarse: &Clustering) -> Result<(Vec<i64>, Vec<usize>)> {
    let m = fine.n_clusters();
    let mut coarse_of = vec![i64::MIN; m];
    for i in 0..fine.labels.len() {
        if !fine.core[i] {
            continue;
        }
        let c = fine.labels[i] as usize;
        let d = coarse.labels[i];
        if d == NOISE {
            return Err(Error::InternalInvariant(format!(
                "core point {i} lost its core status at the larger radius"
            )));
        }
        if coarse_of[c] == i64::MIN {
            coarse_of[c] = d;
        } else if coarse_of[c] != d {
            return Err(Error::InternalInvariant(format!(
                "cluster {c} spans two clusters of the second run"
            )));
        }
    }

    let mut labels: Vec<i64> = fine
        .labels
        .iter()
        .map(|&l| if l == NOISE { NOISE } else { coarse_of[l as usize] })
        .collect();
    renumber_by_smallest_member(&mut labels);
    let mut merge_map = vec![usize::MAX; m];
    for i in 0..fine.labels.len() {
        if fine.labels[i] != NOISE {
            merge_map[fine.labels[i] as usize] = labels[i] as usize;
        }
    }
    Ok((labels, merge_map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line_index(xs: &[f64]) -> NeighborIndex {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        NeighborIndex::build(PointCloud::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn four_point_merge() {
        // X = {0, 0.5, 1.2, 1.7}, min_pts = 2 (all r_2 = 0.5). At eps = 0.6
        // the gap 0.7 splits two clusters; at eps_tilde = 0.8 they join.
        let index = line_index(&[0.0, 0.5, 1.2, 1.7]);
        let pruned = prune_false_clusters(&index, 2, 0.6, 0.8).unwrap();
        assert_eq!(pruned.clustering.labels, vec![0, 0, 0, 0]);
        assert_eq!(pruned.merge_map, vec![0, 0]);
        assert_eq!(pruned.n_merged(), 1);
    }

    #[test]
    fn equal_radii_is_identity() {
        let index = line_index(&[0.0, 0.5, 1.2, 1.7]);
        let plain = dbscan_cluster(&index, 2, 0.6).unwrap();
        let pruned = prune_false_clusters(&index, 2, 0.6, 0.6).unwrap();
        assert_eq!(pruned.clustering.labels, plain.labels);
        assert_eq!(pruned.merge_map, vec![0, 1]);
    }

    #[test]
    fn wide_gap_never_merges() {
        let index = line_index(&[0.0, 0.5, 10.0, 10.5]);
        let pruned = prune_false_clusters(&index, 2, 0.6, 0.8).unwrap();
        assert_eq!(pruned.n_merged(), 2);
        assert_eq!(pruned.merge_map, vec![0, 1]);
    }

    #[test]
    fn eps_order_enforced() {
        let index = line_index(&[0.0, 0.5]);
        assert!(matches!(
            prune_false_clusters(&index, 2, 0.8, 0.6),
            Err(Error::EpsOrderViolation { .. })
        ));
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (PointCloud, usize, f64, f64) {
        let n = rng.gen_range(2..=150);
        let dim = rng.gen_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 4.0).collect())
            .collect();
        let min_pts = rng.gen_range(1..=n.min(6));
        let eps = rng.gen::<f64>() * 0.6 + 0.05;
        let eps_tilde = eps * (1.0 + rng.gen::<f64>());
        (PointCloud::from_rows(&rows).unwrap(), min_pts, eps, eps_tilde)
    }

    #[test]
    fn union_property_and_monotone_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        for _ in 0..100 {
            let (cloud, min_pts, eps, eps_tilde) = random_instance(&mut rng);
            let index = NeighborIndex::build(cloud).unwrap();
            let first = dbscan_cluster(&index, min_pts, eps).unwrap();
            let pruned = prune_false_clusters(&index, min_pts, eps, eps_tilde).unwrap();
            // Per-point membership is preserved exactly; only ids merge.
            for i in 0..first.labels.len() {
                if first.labels[i] == NOISE {
                    assert_eq!(pruned.clustering.labels[i], NOISE);
                } else {
                    assert_eq!(
                        pruned.clustering.labels[i],
                        pruned.merge_map[first.labels[i] as usize] as i64
                    );
                }
            }
            // Monotone count, and equality iff the merge map is injective.
            let m0 = first.n_clusters();
            let m1 = pruned.n_merged();
            assert!(m1 <= m0);
            let distinct: std::collections::HashSet<_> =
                pruned.merge_map.iter().copied().collect();
            assert_eq!(m1 == m0, distinct.len() == pruned.merge_map.len());
            // Merged ids are contiguous and ordered by smallest member.
            let mut seen = Vec::new();
            for &l in &pruned.clustering.labels {
                if l != NOISE && !seen.contains(&l) {
                    seen.push(l);
                }
            }
            assert_eq!(seen, (0..m1 as i64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn idempotent() {
        // Re-merging the merged clustering against the same coarse run
        // changes nothing.
        let mut rng = ChaCha8Rng::seed_from_u64(910);
        for _ in 0..50 {
            let (cloud, min_pts, eps, eps_tilde) = random_instance(&mut rng);
            let index = NeighborIndex::build(cloud).unwrap();
            let coarse = dbscan_cluster(&index, min_pts, eps_tilde).unwrap();
            let once = prune_false_clusters(&index, min_pts, eps, eps_tilde).unwrap();
            let (again, map) = merge_by_containment(&once.clustering, &coarse).unwrap();
            assert_eq!(again, once.clustering.labels);
            assert_eq!(map, (0..once.n_merged()).collect::<Vec<_>>());
        }
    }
}
