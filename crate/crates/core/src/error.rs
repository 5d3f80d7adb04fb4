use thiserror::Error;

/// Errors raised by the state algebra, the estimators and the campaign runners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadratic form is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("real part of the quadratic form is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("photon {0} is not a coordinate of this state")]
    CoordNotFound(usize),
    #[error("photon {0} appears more than once in the label list")]
    DuplicatePhoton(usize),
    #[error("mapped coordinates do not share one representation")]
    MixedRepresentation,
    #[error("linear map is not unimodular (|det| = {0})")]
    NonUnimodular(f64),
    #[error("coordinate labels do not match")]
    LabelMismatch,
    #[error("partition does not cover the coordinates disjointly")]
    BadPartition,
    #[error("invalid pair selector: {0}")]
    InvalidPair(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid target truth: {0}")]
    InvalidTruth(String),
    #[error("transmissivity must lie in (0, 1], got {0}")]
    InvalidEta(f64),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("finite-difference step too large (relative change {0:e} on halving)")]
    StepTooLarge(f64),
    #[error("quantum Fisher information matrix is singular")]
    SingularJ,
    #[error("episode exceeded {0} transmissions")]
    EpisodeOverflow(u64),
    #[error("signal and idler GLM states have different photon counts ({0} vs {1})")]
    MismatchedM(usize, usize),
    #[error("epsilon extrapolation did not converge: {0}")]
    NonConvergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
