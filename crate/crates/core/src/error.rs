use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative transition probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, outside tolerance {tol}")]
    RowSumOutOfTolerance { row: usize, sum: f64, tol: f64 },

    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),

    #[error("non-finite transition probability at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("chain is not irreducible; the stationary distribution is not unique")]
    NotIrreducible,

    #[error("vector is not a probability distribution (mass {mass})")]
    NotProbability { mass: f64 },

    #[error("stationary distribution has zero mass at state {state}")]
    ZeroStationaryMass { state: usize },

    #[error("stationary distribution rejected: {0}")]
    BadStationary(String),

    #[error("norm cannot be evaluated: {0}")]
    NormEvaluation(String),

    #[error("chain is not reversible (detailed balance residual {residual:e})")]
    NotReversible { residual: f64 },

    #[error("state subset is empty")]
    EmptySet,

    #[error("state index {0} out of range")]
    StateOutOfRange(usize),

    #[error("kappa {kappa} is not below the critical value {kappa_star}")]
    KappaBeyondRadius { kappa: f64, kappa_star: f64 },

    #[error("state subset is not small (no m-step minorization with full support)")]
    SNotSmall,

    #[error("weight function has value {value} < 1 at state {state}")]
    VBelowOne { state: usize, value: f64 },

    #[error("fit window contains no observations")]
    EmptyWindow,

    #[error("measure is not in L^{p}(pi)")]
    MeasureNotInLp { p: f64 },

    #[error("bad parameters: {0}")]
    BadParameters(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("invalid chain file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
