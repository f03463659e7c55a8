use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("vector length {0} is not a triangular number")]
    NonTriangularLength(usize),

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("unsupported cone: {0}")]
    UnsupportedCone(String),

    #[error("graph is not chordal")]
    NonChordal,

    #[error("sparsity pattern entry ({0}, {1}) is not covered by any clique")]
    PatternNotCovered(usize, usize),

    #[error("matrix is not a member of {0}")]
    NotMember(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solution not usable: status {0}")]
    NotSolved(String),

    #[error("system matrix is not Hurwitz (spectral abscissa {0})")]
    Unstable(f64),

    #[error("invalid relaxation degree: {0}")]
    InvalidDegree(String),

    #[error("constraint {0} is not supported on a single clique")]
    ConstraintStraddlesCliques(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
