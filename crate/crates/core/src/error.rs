use thiserror::Error;

/// Errors raised by the covariance engine and the inequality checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid function spec `{0}`: {1}")]
    InvalidSpec(String, String),

    #[error("dimension mismatch: expected {expected}x{expected}, got {got}x{got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    /// A structural invariant of an input failed. `invariant` names it, `index`
    /// points at the offending entry when one exists.
    #[error("{invariant} violated{}: {detail}", fmt_index(.index))]
    Validation {
        invariant: &'static str,
        index: Option<(usize, usize)>,
        detail: String,
    },

    #[error("strict positivity violated: eigenvalue {eigenvalue:e} at position {position} is below floor {floor:e}")]
    NotStrictlyPositive {
        eigenvalue: f64,
        position: usize,
        floor: f64,
    },

    #[error("kernel dominance violated at ({x:e}, {y:e}): g1 - g2 = {value:e}")]
    DominanceViolation { x: f64, y: f64, value: f64 },

    #[error("non-finite kernel value at ({x:e}, {y:e})")]
    NonFinite { x: f64, y: f64 },

    /// A quantity that is provably well-behaved came out wrong: a numerics bug,
    /// not a physical result.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

fn fmt_index(index: &Option<(usize, usize)>) -> String {
    match index {
        Some((i, j)) => format!(" at entry ({i}, {j})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
