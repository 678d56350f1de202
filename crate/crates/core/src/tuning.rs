//! Parameter formulas and adaptive estimators: the confidence constant
//! C_{delta,n}, the level radii eps and eps-tilde, the admissible k range,
//! the pointwise/aggregate intrinsic-dimension estimate, the level deviation
//! D-hat and the regularity estimate beta-hat, and the adaptive k choice.
//!
//! "log" is the natural log throughout; the constants c0, k_l, k_u absorb
//! base changes, and one convention keeps outputs reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{knn_density_all, unit_ball_volume};
use crate::error::{Error, Result};
use crate::geometry::NeighborIndex;

/// Tuning parameters for one clustering run. `d` is whatever dimension the
/// caller wants the formulas evaluated in: the estimated intrinsic dimension
/// in manifold mode, the ambient dimension in full-dimensional mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Target density level.
    pub lambda: f64,
    /// Confidence parameter in (0, 1).
    pub delta: f64,
    /// The universal constant C_0. The theory never pins it numerically and
    /// theoretically motivated magnitudes make the slack exceed 1 at desk
    /// scale, so it is an explicit knob.
    pub c0: f64,
    pub k: usize,
    pub d: f64,
    /// When set, replaces C_{delta,n}^2/sqrt(k) as the slack for eps (and
    /// scales by k^(1/6) for eps-tilde, which uses the cube root).
    pub slack_override: Option<f64>,
    /// The epsilon_0 margin in beta' = min{1, beta_hat - eps0}.
    pub eps0: f64,
    pub k_l: f64,
    pub k_u: f64,
}

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_C0: f64 = 0.05;
pub const DEFAULT_EPS0: f64 = 0.1;

impl TuningConfig {
    pub fn new(lambda: f64, k: usize, d: f64) -> Self {
        Self {
            lambda,
            delta: DEFAULT_DELTA,
            c0: DEFAULT_C0,
            k,
            d,
            slack_override: None,
            eps0: DEFAULT_EPS0,
            k_l: 1.0,
            k_u: 1.0,
        }
    }
}

/// C_{delta,n} = c0 · ln(2/delta) · sqrt(d · ln n).
pub fn c_delta_n(c0: f64, delta: f64, n: usize, d: f64) -> Result<f64> {
    if !c0.is_finite() || c0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("c0 = {c0} must be positive")));
    }
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidDelta(delta));
    }
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(c0 * (2.0 / delta).ln() * (d * (n as f64).ln()).sqrt())
}

enum SlackRoot {
    Sqrt,
    Cbrt,
}

fn slack(cfg: &TuningConfig, n: usize, root: SlackRoot) -> Result<f64> {
    let k = cfg.k as f64;
    let s = match cfg.slack_override {
        Some(s0) => match root {
            SlackRoot::Sqrt => s0,
            // s0 stands in for C^2/sqrt(k); the cube-root slack is s0·k^(1/6).
            SlackRoot::Cbrt => s0 * k.powf(1.0 / 6.0),
        },
        None => {
            let c = c_delta_n(cfg.c0, cfg.delta, n, cfg.d)?;
            match root {
                SlackRoot::Sqrt => c * c / k.sqrt(),
                SlackRoot::Cbrt => c * c / k.cbrt(),
            }
        }
    };
    if !s.is_finite() || s < 0.0 {
        return Err(Error::InvalidArgument(format!("slack {s} must be finite and nonnegative")));
    }
    Ok(s)
}

fn epsilon_with(cfg: &TuningConfig, n: usize, root: SlackRoot) -> Result<f64> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::KTooLarge { k: cfg.k, n });
    }
    if !cfg.lambda.is_finite() || cfg.lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda = {} must be positive", cfg.lambda)));
    }
    let vd = unit_ball_volume(cfg.d)?;
    let s = slack(cfg, n, root)?;
    if s >= 1.0 {
        return Err(Error::InfeasibleK { slack: s });
    }
    let base = cfg.k as f64 / (n as f64 * vd * cfg.lambda * (1.0 - s));
    Ok(base.powf(1.0 / cfg.d))
}

/// eps = ( k / (n · v_d · lambda · (1 - C^2/sqrt(k))) )^(1/d).
pub fn epsilon_for_level(cfg: &TuningConfig, n: usize) -> Result<f64> {
    epsilon_with(cfg, n, SlackRoot::Sqrt)
}

/// Same radius with the cube-root slack; always larger than eps for k > 1.
pub fn epsilon_tilde(cfg: &TuningConfig, n: usize) -> Result<f64> {
    epsilon_with(cfg, n, SlackRoot::Cbrt)
}

/// Admissible k range: ceil(k_l·(ln n)^2) up to
/// floor(k_u·(ln n)^(2d/(2+d))·n^(2 beta'/(2 beta'+d))), both clamped to [1, n].
pub fn k_range(n: usize, d: f64, beta_prime: f64, k_l: f64, k_u: f64) -> Result<(usize, usize)> {
    if n < 3 {
        return Err(Error::InvalidN(n));
    }
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidDimension(d));
    }
    if !(beta_prime > 0.0 && beta_prime <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta' = {beta_prime} must lie in (0, 1]")));
    }
    if k_l <= 0.0 || k_u <= 0.0 || !k_l.is_finite() || !k_u.is_finite() {
        return Err(Error::InvalidArgument("k_l and k_u must be positive".into()));
    }
    let ln = (n as f64).ln();
    let lo_raw = (k_l * ln * ln).ceil();
    let hi_raw = (k_u * ln.powf(2.0 * d / (2.0 + d)) * (n as f64).powf(2.0 * beta_prime / (2.0 * beta_prime + d)))
        .floor();
    let clamp = |v: f64| -> usize { v.max(1.0).min(n as f64) as usize };
    let (lo, hi) = (clamp(lo_raw), clamp(hi_raw));
    if lo_raw > hi_raw || lo > hi {
        return Err(Error::EmptyRange { lo, hi, n });
    }
    Ok((lo, hi))
}

/// Pointwise intrinsic dimension: ln 2 / ln(r_2k(x_i) / r_k(x_i)).
/// `None` when the ratio is degenerate (r_k = 0 or r_2k = r_k).
pub fn estimate_dimension_at(index: &NeighborIndex, i: usize, k: usize) -> Result<Option<f64>> {
    let n = index.n();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if 2 * k > n {
        return Err(Error::KTooLarge { k: 2 * k, n });
    }
    let d = index.k_smallest_distances(index.cloud().point(i), 2 * k)?;
    Ok(pointwise_dimension(d[k - 1], d[2 * k - 1]))
}

#[inline]
fn pointwise_dimension(rk: f64, r2k: f64) -> Option<f64> {
    if rk <= 0.0 || r2k <= rk {
        None
    } else {
        Some(std::f64::consts::LN_2 / (r2k / rk).ln())
    }
}

/// Aggregate dimension estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub d_hat_real: f64,
    pub d_hat_rounded: usize,
    /// Samples that survived the density filter and had a defined pointwise
    /// estimate.
    pub n_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_point: Option<Vec<Option<f64>>>,
}

/// Two-pass aggregate: the median pointwise estimate fixes a provisional
/// dimension, f_k under that dimension fixes a density threshold at the
/// given quantile, and the returned estimate is the median over the samples
/// above the threshold. The quantile filter breaks the circular dependence
/// of f_k on d.
pub fn estimate_dimension(
    index: &NeighborIndex,
    k: usize,
    density_quantile: f64,
) -> Result<DimensionEstimate> {
    estimate_dimension_impl(index, k, density_quantile, false)
}

/// Same as [`estimate_dimension`] but retains the pointwise values.
pub fn estimate_dimension_detailed(
    index: &NeighborIndex,
    k: usize,
    density_quantile: f64,
) -> Result<DimensionEstimate> {
    estimate_dimension_impl(index, k, density_quantile, true)
}

fn estimate_dimension_impl(
    index: &NeighborIndex,
    k: usize,
    density_quantile: f64,
    keep_per_point: bool,
) -> Result<DimensionEstimate> {
    let n = index.n();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if 2 * k > n {
        return Err(Error::KTooLarge { k: 2 * k, n });
    }
    if !(density_quantile > 0.0 && density_quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density quantile {density_quantile} must lie in (0, 1]"
        )));
    }
    let per_point: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = index.k_smallest_distances(index.cloud().point(i), 2 * k)?;
            Ok(pointwise_dimension(d[k - 1], d[2 * k - 1]))
        })
        .collect::<Result<_>>()?;
    let defined: Vec<f64> = per_point.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let provisional = median(&defined);
    let d_round = (provisional.round().max(1.0)) as usize;
    let f = knn_density_all(index, k, d_round as f64)?;
    let lambda0 = quantile(&f, density_quantile);
    let kept: Vec<f64> = (0..n)
        .filter(|&i| f[i] >= lambda0)
        .filter_map(|i| per_point[i])
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let d_hat_real = median(&kept);
    Ok(DimensionEstimate {
        d_hat_real,
        d_hat_rounded: (d_hat_real.round().max(1.0)) as usize,
        n_used: kept.len(),
        per_point: keep_per_point.then_some(per_point),
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).floor() as usize;
    v[idx]
}

/// D-hat_{r,k}: min over sample points x0 of the max of |lambda - f_k(x)|
/// over the samples in B(x0, r). Infinite densities make the inner max
/// infinite. x0 is always its own neighbor, so no ball is empty.
pub fn level_deviation(
    index: &NeighborIndex,
    k: usize,
    r: f64,
    lambda: f64,
    d: f64,
) -> Result<f64> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidRadius(r));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let f = knn_density_all(index, k, d)?;
    let n = index.n();
    let result = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut inner = 0.0f64;
            index
                .for_each_within(index.cloud().point(i), r, &mut |j, _| {
                    let dev = (lambda - f[j]).abs();
                    if dev > inner {
                        inner = dev;
                    }
                })
                .map(|_| inner)
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))?;
    Ok(result)
}

/// Regularity estimate beta-hat = ln(D-hat_{r,k}) / ln(r).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta_hat: f64,
    /// The level deviation D-hat the estimate was derived from.
    pub deviation: f64,
    pub r: f64,
    pub k: usize,
    /// True when the default schedule floor(ln(n)^5) exceeded n/2 and was
    /// capped; the schedule is asymptotic and desk-scale n always trips it.
    pub k_capped: bool,
    /// Set when beta_hat <= 0 (deviation at or above 1); choose_k clamps.
    pub low_beta_warning: bool,
}

/// Defaults follow the schedule k = floor(ln(n)^5) capped at floor(n/2) and
/// r = 1/sqrt(ln n); both can be overridden.
pub fn estimate_beta(
    index: &NeighborIndex,
    lambda: f64,
    d: f64,
    k_override: Option<usize>,
    r_override: Option<f64>,
) -> Result<BetaEstimate> {
    let n = index.n();
    if n < 3 {
        return Err(Error::InvalidN(n));
    }
    let ln = (n as f64).ln();
    let schedule = ln.powi(5).floor();
    let cap = (n / 2).max(1) as f64;
    let (k, k_capped) = match k_override {
        Some(k) => (k, false),
        None => (schedule.min(cap).max(1.0) as usize, schedule > cap),
    };
    let r = r_override.unwrap_or(1.0 / ln.sqrt());
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::RadiusOutOfRange(r));
    }
    let deviation = level_deviation(index, k, r, lambda, d)?;
    if deviation == 0.0 || deviation.is_infinite() {
        return Err(Error::DegenerateBeta(deviation));
    }
    let beta_hat = deviation.ln() / r.ln();
    Ok(BetaEstimate { beta_hat, deviation, r, k, k_capped, low_beta_warning: beta_hat <= 0.0 })
}

/// Which exponent the adaptive k uses. The rate discussion uses
/// k ~ n^(2 beta'/(2 beta'+d)); the adaptive-parameter remark prints the
/// exponent without the factor 2. Both are selectable; the doubled form is
/// the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KExponent {
    RateMatched,
    RemarkLiteral,
}

/// Adaptive k: beta' = min{1, max(beta_hat - eps0, 0.1)},
/// k = round(n^(2 beta'/(2 beta'+d))), clamped to [ceil(k_l (ln n)^2), n/2].
pub fn choose_k(n: usize, d: f64, beta_hat: f64, eps0: f64, k_l: f64, exponent: KExponent) -> usize {
    let beta_prime = (beta_hat - eps0).max(0.1).min(1.0);
    let expo = match exponent {
        KExponent::RateMatched => 2.0 * beta_prime / (2.0 * beta_prime + d),
        KExponent::RemarkLiteral => beta_prime / (2.0 * beta_prime + d),
    };
    let raw = (n as f64).powf(expo).round();
    let ln = (n as f64).ln();
    let lo = (k_l * ln * ln).ceil().max(1.0);
    let hi = ((n / 2) as f64).max(1.0);
    raw.max(lo).min(hi) as usize
}
