use thiserror::Error;

/// Errors raised anywhere in the estimator pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability {value} for outcome {outcome}")]
    NegativeProbability { outcome: String, value: f64 },

    #[error("probabilities sum to {sum}, which is not within 1e-9 of 1")]
    NotNormalized { sum: f64 },

    #[error("distribution has no outcome with positive probability")]
    EmptyDistribution,

    #[error("unknown grouping `{0}`")]
    UnknownGrouping(String),

    #[error("point is not strictly inside the exponential cone")]
    BoundaryPoint,

    #[error("no admissible triplet: the marginals have disjoint supports")]
    EmptyModel,

    #[error("point is infeasible for the convex program: {0}")]
    InfeasiblePoint(String),

    #[error("ill-conditioned KKT system: {0}")]
    IllConditionedKkt(String),

    #[error("solver produced no iterate: {0}")]
    SolverException(String),

    #[error("clipped mass {mass} deviates from 1 by more than 1e-6")]
    MassLoss { mass: f64 },

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("null space dimension {0} exceeds the brute-force limit of 3")]
    DimensionTooLarge(usize),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
