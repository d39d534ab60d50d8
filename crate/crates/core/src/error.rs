use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("covariate index {index} is not testable (expected 1..={p}; 0 is the intercept)")]
    CovariateOutOfRange { index: usize, p: usize },

    #[error("bernoulli response must be 0 or 1, found {value} at row {row}")]
    NonBinaryResponse { row: usize, value: f64 },

    #[error("noise variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("gaussian family requires a noise variance")]
    MissingVariance,

    #[error("family/output activation mismatch: {0}")]
    FamilyMismatch(&'static str),

    #[error("non-finite second derivative at ({row}, {col})")]
    NonFiniteSecondDerivative { row: usize, col: usize },

    #[error("all {} restarts failed: {}", .0.len(), .0.join("; "))]
    AllRestartsFailed(Vec<String>),

    #[error(
        "information matrix plus ridge term is numerically singular (smallest |eigenvalue| {min_abs_eigenvalue:e}); \
         refit with a larger ridge penalty lambda or a smaller hidden layer"
    )]
    SingularInformation { min_abs_eigenvalue: f64 },

    #[error("covariance diagonal entry {index} is {value:e}; the covariance is not positive definite")]
    NonPositiveVarianceEntry { index: usize, value: f64 },

    #[error("sub-covariance for covariate {covariate} is singular or not positive definite")]
    SingularSubCovariance { covariate: usize },

    #[error("covariance is not positive definite; confidence bands are undefined")]
    NotPositiveDefinite,

    #[error("column {0} is not a dummy (0/1) column")]
    NotDummy(usize),

    #[error("missing metadata: {0}")]
    MissingMetadata(String),

    #[error("design matrix is rank deficient; collinear columns {0:?} (0 = intercept)")]
    RankDeficient(Vec<usize>),

    #[error("fold {fold} failed: {reason}")]
    FoldFailed { fold: usize, reason: String },

    #[error("fit did not converge")]
    NotConverged,
}
