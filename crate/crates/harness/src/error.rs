use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] nlrlda::Error),

    #[error("{path}: line {line}: {message}")]
    Config { path: String, line: usize, message: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("degenerate classifier: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 2 for input errors, 3 for a degenerate classifier, 4 for numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        use nlrlda::Error as E;
        match self {
            HarnessError::Core(e) => match e {
                E::DegenerateD { .. } | E::DegenerateTrace { .. } | E::DegeneratePrime | E::AllZeroSpectrum => 3,
                E::ConvergenceFailure | E::NoConvergence { .. } => 4,
                _ => 2,
            },
            HarnessError::Degenerate(_) => 3,
            HarnessError::Config { .. } | HarnessError::Invalid(_) | HarnessError::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
