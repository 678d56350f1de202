//! Recovery evaluation: Hausdorff distances between finite point sets,
//! optimal cluster-to-truth matching, and the closed-form bound and rate
//! evaluators.

use serde::{Deserialize, Serialize};

use crate::dbscan::Clustering;
use crate::error::{Error, Result};
use crate::geometry::{NeighborIndex, PointCloud};

/// max over a in A of min over b in B of |a - b|. An empty A gives 0 (empty
/// supremum); an empty B with nonempty A is undefined.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    if b.is_empty() {
        return Err(Error::EmptyTarget);
    }
    if a.dim() != b.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let index = NeighborIndex::build(b.clone())?;
    directed_against_index(a, &index)
}

fn directed_against_index(a: &PointCloud, b: &NeighborIndex) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in a.iter() {
        let d = b.nearest_distance(p)?;
        if d > worst {
            worst = d;
        }
    }
    Ok(worst)
}

/// Symmetric Hausdorff distance: the max of the two directed distances.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

fn hausdorff_indexed(
    a: &PointCloud,
    a_index: &NeighborIndex,
    b: &PointCloud,
    b_index: &NeighborIndex,
) -> Result<f64> {
    Ok(directed_against_index(a, b_index)?.max(directed_against_index(b, a_index)?))
}

/// One matched (estimate, truth) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedPair {
    pub estimate: usize,
    pub truth: usize,
    pub hausdorff: f64,
    /// True when the truth discretization pitch is at most one tenth of the
    /// reported error, i.e. the comparison is resolved at this resolution.
    pub resolved: bool,
}

/// Cluster-recovery report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub matches: Vec<MatchedPair>,
    pub unmatched_estimates: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
    pub bijection: bool,
    pub truth_resolution: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theoretical_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_exponent: Option<f64>,
}

impl RecoveryReport {
    /// Largest matched error, if any pair matched.
    pub fn worst_error(&self) -> Option<f64> {
        self.matches.iter().map(|m| m.hausdorff).fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.max(v)))
        })
    }
}

/// Matches estimated clusters against truth components by minimizing the
/// total pairwise Hausdorff distance over one-to-one assignments
/// (rectangular: the smaller side is fully matched). Exact ties fall to the
/// lexicographically smallest (estimate id, truth id) pairing by scan order.
pub fn match_clusters(
    cloud: &PointCloud,
    clustering: &Clustering,
    truth: &[PointCloud],
    truth_resolution: f64,
) -> Result<RecoveryReport> {
    if truth.iter().any(|t| t.is_empty()) {
        return Err(Error::InvalidArgument("truth components must be nonempty".into()));
    }
    let m = clustering.n_clusters();
    let t = truth.len();

    let est_sets: Vec<PointCloud> = (0..m)
        .map(|c| cloud.select(&clustering.members(c)))
        .collect::<Result<_>>()?;
    let est_indexes: Vec<NeighborIndex> =
        est_sets.iter().map(|s| NeighborIndex::build(s.clone())).collect::<Result<_>>()?;
    let truth_indexes: Vec<NeighborIndex> =
        truth.iter().map(|s| NeighborIndex::build(s.clone())).collect::<Result<_>>()?;

    let mut cost = vec![vec![0.0f64; t]; m];
    for i in 0..m {
        for j in 0..t {
            cost[i][j] = hausdorff_indexed(&est_sets[i], &est_indexes[i], &truth[j], &truth_indexes[j])?;
        }
    }

    let assignment = min_cost_assignment(&cost);
    let mut matches = Vec::new();
    let mut matched_truth = vec![false; t];
    for (i, j) in assignment {
        let err = cost[i][j];
        matches.push(MatchedPair {
            estimate: i,
            truth: j,
            hausdorff: err,
            resolved: truth_resolution <= err * 0.1,
        });
        matched_truth[j] = true;
    }
    matches.sort_by_key(|m| m.estimate);
    let matched_est: std::collections::HashSet<usize> =
        matches.iter().map(|m| m.estimate).collect();
    let unmatched_estimates: Vec<usize> = (0..m).filter(|i| !matched_est.contains(i)).collect();
    let unmatched_truth: Vec<usize> = (0..t).filter(|&j| !matched_truth[j]).collect();
    let bijection = unmatched_estimates.is_empty() && unmatched_truth.is_empty();
    Ok(RecoveryReport {
        matches,
        unmatched_estimates,
        unmatched_truth,
        bijection,
        truth_resolution,
        theoretical_bound: None,
        rate_exponent: None,
    })
}

/// Exact minimum-cost rectangular assignment (Hungarian algorithm with
/// potentials, O(n^3)). Returns matched (row, col) pairs covering the
/// smaller side. Deterministic: columns are scanned in ascending order, so
/// exact cost ties resolve to the smallest indices.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    // Pad to square with a constant; every completion pays the same dummy
    // total, so real-pair optimality is unaffected.
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };

    // Potentials u, v; way[j] = previous column on the alternating path;
    // links[j] = row matched to column j. 1-based sentinel at index 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut links = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        links[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = links[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[links[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if links[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            links[j0] = links[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = Vec::new();
    for j in 1..=n {
        let i = links[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            out.push((i - 1, j - 1));
        }
    }
    out.sort_unstable();
    out
}

/// The closed-form Hausdorff error bound
/// 2 · (4 lambda / c_beta_lower)^(1/beta) · c_dn^(2/beta) · k^(-1/(2 beta)).
pub fn theoretical_error_bound(
    lambda: f64,
    c_beta_lower: f64,
    beta: f64,
    c_dn: f64,
    k: usize,
) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("c_beta_lower", c_beta_lower), ("beta", beta), ("c_dn", c_dn)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
        }
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(2.0
        * (4.0 * lambda / c_beta_lower).powf(1.0 / beta)
        * c_dn.powf(2.0 / beta)
        * (k as f64).powf(-1.0 / (2.0 * beta)))
}

/// The recovery-rate exponent: -1/(2 beta + dim·max{1, beta}) on a manifold,
/// -1/(2 beta + dim) in the full-dimensional setting.
pub fn rate_exponent(dim: f64, beta: f64, full_dimensional: bool) -> Result<f64> {
    if !dim.is_finite() || dim <= 0.0 {
        return Err(Error::InvalidDimension(dim));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be positive")));
    }
    let denom = if full_dimensional { 2.0 * beta + dim } else { 2.0 * beta + dim * beta.max(1.0) };
    Ok(-1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbscan::NOISE;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn set(xs: &[f64]) -> PointCloud {
        if xs.is_empty() {
            return PointCloud::empty(1);
        }
        PointCloud::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn directed_cases() {
        assert_eq!(directed_hausdorff(&set(&[0.0, 1.0]), &set(&[0.0])).unwrap(), 1.0);
        assert_eq!(directed_hausdorff(&set(&[0.0]), &set(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(directed_hausdorff(&set(&[]), &set(&[0.0])).unwrap(), 0.0);
        assert_eq!(directed_hausdorff(&set(&[]), &set(&[])).unwrap(), 0.0);
        assert!(matches!(
            directed_hausdorff(&set(&[0.0]), &set(&[])),
            Err(Error::EmptyTarget)
        ));
    }

    #[test]
    fn symmetric_cases() {
        assert_eq!(hausdorff(&set(&[0.0]), &set(&[3.0])).unwrap(), 3.0);
        assert_eq!(hausdorff(&set(&[0.0, 2.0]), &set(&[0.0, 2.0])).unwrap(), 0.0);
        assert_eq!(hausdorff(&set(&[0.0, 2.0]), &set(&[1.0])).unwrap(), 1.0);
        assert!(matches!(hausdorff(&set(&[]), &set(&[0.0])), Err(Error::EmptySet)));
    }

    #[test]
    fn directed_zero_iff_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let nb = rng.gen_range(1..20);
            let b: Vec<f64> = (0..nb).map(|_| (rng.gen::<f64>() * 8.0).round()).collect();
            let na = rng.gen_range(1..10);
            let a: Vec<f64> = (0..na)
                .map(|_| {
                    if rng.gen_bool(0.6) {
                        b[rng.gen_range(0..nb)]
                    } else {
                        (rng.gen::<f64>() * 8.0).round() + 0.5
                    }
                })
                .collect();
            let d = directed_hausdorff(&set(&a), &set(&b)).unwrap();
            let subset = a.iter().all(|x| b.contains(x));
            assert_eq!(d == 0.0, subset);
        }
    }

    #[test]
    fn metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let dim = rng.gen_range(1..=3);
            let mut mk = |n: usize| {
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 4.0).collect())
                    .collect();
                PointCloud::from_rows(&rows).unwrap()
            };
            let (a, b, c) = (mk(rng.gen_range(1..=50)), mk(rng.gen_range(1..=50)), mk(rng.gen_range(1..=50)));
            let dab = hausdorff(&a, &b).unwrap();
            let dba = hausdorff(&b, &a).unwrap();
            assert_eq!(dab, dba, "symmetry");
            assert_eq!(hausdorff(&a, &a).unwrap(), 0.0, "identity");
            let dac = hausdorff(&a, &c).unwrap();
            let dcb = hausdorff(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-12, "triangle: {dab} > {dac} + {dcb}");
        }
    }

    fn clustering_of(labels: Vec<i64>) -> Clustering {
        let core = labels.iter().map(|&l| l != NOISE).collect();
        Clustering { labels, core, min_pts: 1, eps: 1.0 }
    }

    #[test]
    fn matches_two_by_two() {
        // Estimates near truths with a clear pairing.
        let cloud = set(&[0.0, 0.1, 10.0, 10.1]);
        let clustering = clustering_of(vec![0, 0, 1, 1]);
        let truth = vec![set(&[0.0, 0.05, 0.1]), set(&[10.0, 10.05, 10.1])];
        let report = match_clusters(&cloud, &clustering, &truth, 0.05).unwrap();
        assert!(report.bijection);
        assert_eq!(report.matches.len(), 2);
        assert_eq!(report.matches[0].truth, 0);
        assert_eq!(report.matches[1].truth, 1);
        // Hand-computed: estimate {0, 0.1} vs truth {0, 0.05, 0.1} -> 0.05.
        assert_relative_eq!(report.matches[0].hausdorff, 0.05, max_relative = 1e-12);
        assert_relative_eq!(report.matches[1].hausdorff, 0.05, max_relative = 1e-12);
        assert!(report.matches[0].resolved);
    }

    #[test]
    fn cardinality_mismatches() {
        let cloud = set(&[0.0, 5.0, 10.0]);
        let clustering = clustering_of(vec![0, 1, 2]);
        let truth = vec![set(&[0.0]), set(&[10.0])];
        let report = match_clusters(&cloud, &clustering, &truth, 0.01).unwrap();
        assert_eq!(report.matches.len(), 2);
        assert!(!report.bijection);
        assert_eq!(report.unmatched_estimates, vec![1]);
        assert!(report.unmatched_truth.is_empty());

        // No estimates at all: everything in truth goes unmatched.
        let empty = clustering_of(vec![NOISE, NOISE, NOISE]);
        let report = match_clusters(&cloud, &empty, &truth, 0.01).unwrap();
        assert!(report.matches.is_empty());
        assert_eq!(report.unmatched_truth, vec![0, 1]);
        assert!(!report.bijection);
    }

    #[test]
    fn assignment_beats_every_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let m = rng.gen_range(1..=5);
            let t = rng.gen_range(1..=5);
            let cost: Vec<Vec<f64>> =
                (0..m).map(|_| (0..t).map(|_| rng.gen::<f64>() * 10.0).collect()).collect();
            let picked = min_cost_assignment(&cost);
            let total: f64 = picked.iter().map(|&(i, j)| cost[i][j]).sum();
            // Exhaustive check over all injections of the smaller side.
            let best = brute_best(&cost);
            assert!(total <= best + 1e-9, "assignment {total} worse than brute {best}");
            assert_eq!(picked.len(), m.min(t));
        }
    }

    fn brute_best(cost: &[Vec<f64>]) -> f64 {
        let m = cost.len();
        let t = cost[0].len();
        if m <= t {
            let mut cols: Vec<usize> = (0..t).collect();
            permute_min(&mut cols, 0, m, &|perm| (0..m).map(|i| cost[i][perm[i]]).sum())
        } else {
            let mut rows: Vec<usize> = (0..m).collect();
            permute_min(&mut rows, 0, t, &|perm| (0..t).map(|j| cost[perm[j]][j]).sum())
        }
    }

    fn permute_min(items: &mut Vec<usize>, depth: usize, take: usize, eval: &dyn Fn(&[usize]) -> f64) -> f64 {
        if depth == take {
            return eval(&items[..take]);
        }
        let mut best = f64::INFINITY;
        for i in depth..items.len() {
            items.swap(depth, i);
            best = best.min(permute_min(items, depth + 1, take, eval));
            items.swap(depth, i);
        }
        best
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // All costs equal: expect the identity pairing.
        let cost = vec![vec![1.0; 3]; 3];
        assert_eq!(min_cost_assignment(&cost), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn id_permutation_invariance() {
        // Swapping cluster ids must not change the match structure.
        let cloud = set(&[0.0, 0.1, 10.0, 10.1]);
        let truth = vec![set(&[0.0, 0.1]), set(&[10.0, 10.1])];
        let a = match_clusters(&cloud, &clustering_of(vec![0, 0, 1, 1]), &truth, 0.01).unwrap();
        let b = match_clusters(&cloud, &clustering_of(vec![1, 1, 0, 0]), &truth, 0.01).unwrap();
        let pairs_a: Vec<(usize, f64)> =
            a.matches.iter().map(|m| (m.truth, m.hausdorff)).collect();
        let mut pairs_b: Vec<(usize, f64)> =
            b.matches.iter().map(|m| (m.truth, m.hausdorff)).collect();
        pairs_b.sort_by_key(|p| p.0);
        assert_eq!(pairs_a, pairs_b);
        assert!(a.bijection && b.bijection);
    }

    #[test]
    fn bound_closed_forms() {
        assert_relative_eq!(
            theoretical_error_bound(1.0, 4.0, 1.0, 1.0, 16).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            theoretical_error_bound(1.0, 4.0, 2.0, 1.0, 16).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        // Quadrupling k halves the bound at beta = 1.
        let b = theoretical_error_bound(0.7, 2.0, 1.0, 1.3, 25).unwrap();
        let b4 = theoretical_error_bound(0.7, 2.0, 1.0, 1.3, 100).unwrap();
        assert_relative_eq!(b4, b / 2.0, max_relative = 1e-12);
        assert!(theoretical_error_bound(0.0, 1.0, 1.0, 1.0, 4).is_err());
    }

    #[test]
    fn rate_exponents() {
        assert_relative_eq!(rate_exponent(2.0, 1.0, false).unwrap(), -0.25, max_relative = 1e-15);
        assert_relative_eq!(rate_exponent(2.0, 2.0, false).unwrap(), -0.125, max_relative = 1e-15);
        assert_relative_eq!(
            rate_exponent(2.0, 2.0, true).unwrap(),
            -1.0 / 6.0,
            max_relative = 1e-15
        );
        // Continuity across the max{1, beta} kink at beta = 1.
        let below = rate_exponent(3.0, 1.0 - 1e-9, false).unwrap();
        let above = rate_exponent(3.0, 1.0 + 1e-9, false).unwrap();
        assert!((below - above).abs() < 1e-9);
    }
}
