use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    NoConvergence { error: f64, intervals: usize },
    #[error("root is not bracketed: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoBracket { f_lo: f64, f_hi: f64 },
    #[error("response violates {family} support at observation {index}: {value}")]
    FamilySupport {
        family: &'static str,
        index: usize,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("model space holds at least {count} models, above the cap of {cap}")]
    TooManyModels { count: u128, cap: u128 },
    #[error("nonlocal prior density is zero at the origin (coordinate {0})")]
    AtOrigin(usize),
    #[error("prior kind mismatch: expected {expected}, got {got}")]
    WrongPriorKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("duplicate model {0} in posterior entries")]
    DuplicateModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
