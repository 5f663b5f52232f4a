//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by complex construction, model assembly, inference and I/O.
#[derive(Debug, Error)]
pub enum SgmError {
    /// A simplex references a vertex index outside `[0, n_vertices)`.
    #[error("vertex index {index} out of range for {n_vertices} vertices")]
    IndexOutOfRange { index: usize, n_vertices: usize },

    /// An edge or triangle appears more than once (after canonical sorting).
    #[error("duplicate {kind}: {vertices:?}")]
    DuplicateSimplex {
        kind: &'static str,
        vertices: Vec<usize>,
    },

    /// A triangle whose edge face is not part of the complex.
    #[error("triangle {triangle:?} has a missing edge face ({u}, {v})")]
    DanglingFace {
        triangle: [usize; 3],
        u: usize,
        v: usize,
    },

    /// Vector or matrix dimensions do not match the complex.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix required to be positive definite is not (or is numerically
    /// near-singular per the pivot rule).
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The block eliminated by a Schur complement is numerically singular.
    #[error("singular block in Schur complement")]
    SingularBlock,

    /// One of the factor constraints (a) `I - B1^T diag(dv) B1 > 0` or
    /// (b) `I - B2 diag(dt) B2^T > 0` fails.
    #[error("constraint ({0}) violated: factor is not positive definite")]
    ConstraintViolated(char),

    /// A sample matrix with zero rows.
    #[error("empty sample matrix")]
    EmptySample,

    /// The closed-form scale update is undefined because
    /// `tr(C (I - A - B)) <= 0`.
    #[error("nonpositive curvature trace {0}: degenerate covariance or infeasible point")]
    NonpositiveCurvatureTrace(f64),

    /// A subproblem was started from an infeasible point.
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    /// Sample covariance with zero trace; the likelihood is unbounded.
    #[error("degenerate covariance: trace is zero")]
    DegenerateCovariance,

    /// NMSE is undefined when the truth parameters are all zero.
    #[error("zero truth norm: NMSE is undefined")]
    ZeroTruthNorm,

    /// Invalid argument outside the structured cases above.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A file parsed but its contents violate the expected schema.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, SgmError>;
