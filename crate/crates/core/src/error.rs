use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point outside the search bounds: {0}")]
    OutOfBounds(String),

    #[error("cannot advance past the last environment (t = {time_step}, T = {num_environments})")]
    PastLastEnvironment {
        time_step: usize,
        num_environments: usize,
    },

    #[error("covariance matrix is numerically singular even with jitter {jitter:e}")]
    Singular { jitter: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parameter vector does not match the surrogate variant")]
    WrongVariant,

    #[error("function-evaluation budget exhausted for environment {env}")]
    BudgetExhausted { env: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
