//! The k-NN density estimator f_k(x) = k / (n · v_d · r_k(x)^d) and the
//! unit-ball volume it depends on.
//!
//! Density values are plain `f64`: nonnegative, with `+inf` exactly when
//! r_k = 0 (duplicate points are legal inputs and trivially dense). Every
//! downstream level comparison orders `+inf` above all finite levels.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::NeighborIndex;

/// Volume of the unit ball in dimension `d`: pi^(d/2) / Gamma(d/2 + 1).
///
/// `d` may be any positive real, since estimated dimensions are real before
/// rounding. Evaluated in log space to stay finite for large `d`.
pub fn unit_ball_volume(d: f64) -> Result<f64> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(((d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0)).exp())
}

/// f_k at an arbitrary query point.
pub fn knn_density(index: &NeighborIndex, q: &[f64], k: usize, d: f64) -> Result<f64> {
    let vd = unit_ball_volume(d)?;
    let rk = index.kth_neighbor_distance(q, k)?;
    Ok(density_from_radius(rk, k, index.n(), d, vd))
}

/// f_k at every sample point, in id order.
pub fn knn_density_all(index: &NeighborIndex, k: usize, d: f64) -> Result<Vec<f64>> {
    let vd = unit_ball_volume(d)?;
    let n = index.n();
    let radii = index.all_kth_neighbor_distances(k)?;
    Ok(radii.into_par_iter().map(|rk| density_from_radius(rk, k, n, d, vd)).collect())
}

#[inline]
pub(crate) fn density_from_radius(rk: f64, k: usize, n: usize, d: f64, vd: f64) -> f64 {
    if rk == 0.0 {
        f64::INFINITY
    } else {
        k as f64 / (n as f64 * vd * rk.powf(d))
    }
}
