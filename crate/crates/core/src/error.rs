//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by discretization, assembly, integration and the runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Discretization parameters are unusable (too few points, bad bounds).
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    /// Operand shapes do not match the discretization.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A requested sample budget exceeds the configured cap.
    #[error("sample budget exceeded: requested {requested}, cap {cap}")]
    BudgetExceeded { requested: usize, cap: usize },

    /// A scalar parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A kernel matrix failed its positive-semi-definiteness check.
    #[error("kernel matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    /// Evaluation outside the stored coordinate range.
    #[error("coordinate {coord} outside grid range [{lo}, {hi}]")]
    OutOfRange { coord: f64, lo: f64, hi: f64 },

    /// A boundary point is not covered by any boundary-condition spec.
    #[error("boundary point {point} is not covered by any boundary condition")]
    BoundaryCoverage { point: usize },

    /// The assembled boundary sub-system is singular.
    #[error("singular boundary system (first affected boundary row {row})")]
    SingularBoundarySystem { row: usize },

    /// Non-finite values appeared during evaluation or integration.
    #[error("numerical blow-up at t = {t:.6e}: {context}")]
    NumericalBlowup { t: f64, context: String },

    /// The correlation factor became too ill-conditioned to invert.
    #[error(
        "ill-conditioned correlation factor: cond = {cond:.3e} exceeds cap {cap:.3e}; \
         consider initializing from a later switching time or lowering the rank"
    )]
    IllConditionedFactor { cond: f64, cap: f64 },

    /// The stochastic-coefficient covariance became too ill-conditioned.
    #[error("ill-conditioned covariance: cond = {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditionedCovariance { cond: f64, cap: f64 },

    /// A diagnostic was requested on a model it does not apply to.
    #[error("unsupported diagnostic: {0}")]
    UnsupportedDiagnostic(String),

    /// Initialization snapshot is rank-deficient below the floor.
    #[error(
        "degenerate initialization: singular value {index} is {value:.3e} (floor {floor:.3e}); \
         use a later switching time or a smaller rank"
    )]
    DegenerateInitialization {
        index: usize,
        value: f64,
        floor: f64,
    },

    /// A boundary-error metric was called on the wrong boundary type.
    #[error("wrong metric for this boundary type: {0}")]
    WrongMetric(String),

    /// Configuration file is malformed or violates a constraint.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure while reading inputs or writing outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
