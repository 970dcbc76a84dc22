use gprd_core::Error as CoreError;
use gprd_sim::SimError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    /// `row` counts data rows from 1, not including the header.
    #[error("row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("input has no data rows")]
    EmptyInput,
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

fn core_is_numerical(e: &CoreError) -> bool {
    !matches!(e, CoreError::InvalidInput(_))
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::MissingColumn(_) | Self::ParseError { .. } | Self::EmptyInput | Self::Io(_) => EXIT_DATA,
            Self::Core(e) | Self::Sim(SimError::Core(e)) => {
                if core_is_numerical(e) {
                    EXIT_NUMERICAL
                } else {
                    EXIT_DATA
                }
            }
            Self::Sim(SimError::TooManyFailures { .. }) => EXIT_NUMERICAL,
            Self::Sim(SimError::InvalidSpec(_)) => EXIT_USAGE,
            Self::Sim(SimError::EmptyWindow { .. }) => EXIT_DATA,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::MissingColumn(_) => "missing_column",
            Self::ParseError { .. } => "parse_error",
            Self::EmptyInput => "empty_input",
            Self::Io(_) => "io",
            Self::Core(e) | Self::Sim(SimError::Core(e)) => match e {
                CoreError::CholeskyFailure { .. } => "cholesky_failure",
                CoreError::NegativeVariance(_) => "negative_variance",
                CoreError::DivergentChains { .. } => "divergent_chains",
                CoreError::NonFiniteDensity => "non_finite_density",
                CoreError::NoConvergence { .. } => "no_convergence",
                CoreError::DenominatorNearZero(_) => "denominator_near_zero",
                CoreError::TooManyFailedDraws { .. } => "too_many_failed_draws",
                CoreError::InvalidInput(_) => "invalid_input",
            },
            Self::Sim(SimError::EmptyWindow { .. }) => "empty_window",
            Self::Sim(SimError::TooManyFailures { .. }) => "too_many_failures",
            Self::Sim(SimError::InvalidSpec(_)) => "invalid_spec",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: ErrorBody {
                kind: self.kind(),
                message: self.to_string(),
                exit_code: self.exit_code(),
                row: match self {
                    Self::ParseError { row, .. } => Some(*row),
                    _ => None,
                },
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
}
