//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("k = {k} exceeds the usable sample size (n = {n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid radius {0}: must be finite and nonnegative")]
    InvalidRadius(f64),
    #[error("invalid dimension {0}: must be positive and finite")]
    InvalidDimension(f64),
    #[error("invalid delta {0}: must lie in (0, 1)")]
    InvalidDelta(f64),
    #[error("invalid sample count n = {0}: must be at least 2")]
    InvalidN(usize),
    #[error(
        "infeasible k: slack {slack:.6} >= 1; increase k, decrease c0, or set a slack override"
    )]
    InfeasibleK { slack: f64 },
    #[error("empty k range: lower bound {lo} exceeds upper bound {hi} after clamping to [1, {n}]")]
    EmptyRange { lo: usize, hi: usize, n: usize },
    #[error("degenerate sample: no pointwise dimension estimate is defined")]
    DegenerateSample,
    #[error("degenerate beta estimate: level deviation is {0}")]
    DegenerateBeta(f64),
    #[error("radius {0} out of range: the beta estimate requires r in (0, 1)")]
    RadiusOutOfRange(f64),
    #[error("epsilon order violation: eps_tilde = {eps_tilde} is smaller than eps = {eps}")]
    EpsOrderViolation { eps: f64, eps_tilde: f64 },
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
    #[error("directed Hausdorff distance is undefined: target set is empty")]
    EmptyTarget,
    #[error("Hausdorff distance requires two nonempty sets")]
    EmptySet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("density normalization integral is not finite")]
    NonFiniteIntegral,
    #[error("rejection sampling stalled: acceptance rate fell below {0:e}")]
    RejectionStall(f64),
    #[error("point lies off the domain: {0}")]
    OffManifold(String),
    #[error("level {0} exceeds the maximum density; the level set is empty")]
    EmptyLevelSet(f64),
    #[error("the exact deviation oracle does not cover this input: {0}")]
    UnsupportedLevel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
