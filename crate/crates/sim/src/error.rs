use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("window keeps {below} observations below and {above} above the cutoff; at least 5 per side are needed")]
    EmptyWindow { below: usize, above: usize },
    #[error("{estimator} failed in {failed} of {reps} replications")]
    TooManyFailures {
        estimator: String,
        failed: usize,
        reps: usize,
    },
    #[error("invalid simulation setting: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Core(#[from] gprd_core::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
