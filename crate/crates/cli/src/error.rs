use std::io;
use std::path::Path;

use fnnstat_core::Error as CoreError;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for bad arguments, unreadable or malformed input files.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numerical failures (non-PD covariance, failed fits).
pub const EXIT_NUMERICAL: i32 = 3;

/// Appended to every covariance failure.
pub const LAMBDA_HINT: &str =
    "hint: the covariance estimate needs a better-conditioned information matrix; refit with a larger --lambda (e.g. 0.01 or 0.1) or fewer hidden nodes";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn not_positive_definite(min_eigenvalue: f64) -> Self {
        CliError::Numerical(format!(
            "covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})\n{LAMBDA_HINT}"
        ))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SingularInformation { .. }
            | CoreError::NonPositiveVarianceEntry { .. }
            | CoreError::SingularSubCovariance { .. }
            | CoreError::NotPositiveDefinite => CliError::Numerical(format!("{e}\n{LAMBDA_HINT}")),
            CoreError::NonFiniteSecondDerivative { .. }
            | CoreError::AllRestartsFailed(_)
            | CoreError::NotConverged
            | CoreError::FoldFailed { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
