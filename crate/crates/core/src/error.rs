use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Cholesky factorization failed: matrix of order {order} is not numerically positive definite")]
    CholeskyFailure { order: usize },
    #[error("predictive variance {0} is negative beyond round-off tolerance")]
    NegativeVariance(f64),
    #[error("{divergent} of {total} post-warmup transitions diverged")]
    DivergentChains { divergent: usize, total: usize },
    #[error("log density is not finite at the initial point")]
    NonFiniteDensity,
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("take-up jump {0} is too close to zero for a ratio estimator")]
    DenominatorNearZero(f64),
    #[error("{failed} of {total} posterior draws failed at prediction time")]
    TooManyFailedDraws { failed: usize, total: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
