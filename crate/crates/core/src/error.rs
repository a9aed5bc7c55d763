use thiserror::Error;

/// Errors produced by the estimation, tuning and oracle routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("class {class} has no samples")]
    EmptyClass { class: u8 },

    #[error("class {class} has {count} samples, at least 2 are required")]
    InsufficientSamples { class: u8, count: usize },

    #[error("label {label} at sample {index} is not 0 or 1")]
    InvalidLabel { index: usize, label: i64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("population covariance is singular or not positive definite")]
    SingularSigma,

    #[error("covariance model is not positive definite at p = {p}")]
    NotPositiveDefinite { p: usize },

    #[error("regularization parameter {gamma} outside the admissible interval {interval}")]
    DomainError { gamma: f64, interval: &'static str },

    #[error("regularized target combination is not invertible")]
    SingularTarget,

    #[error("spectrum is identically zero")]
    AllZeroSpectrum,

    #[error("normalized trace (1/ñ)tr[SQ] = {t1} is not below 1")]
    DegenerateTrace { t1: f64 },

    #[error("derivative ê′ vanishes (S = 0)")]
    DegeneratePrime,

    #[error("discriminant variance D = {value} is not positive")]
    DegenerateD { value: f64 },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
