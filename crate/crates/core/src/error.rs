use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate observation id `{0}`")]
    DuplicateId(String),
    #[error("only {valid} valid observations, at least {required} required")]
    TooFewObservations { valid: usize, required: usize },
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: String,
        got: usize,
        expected: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("design matrix is rank deficient; dependent columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("R-squared equals 1, F statistic is infinite")]
    InfiniteF,
    #[error("weights have no links (sum of weights is zero)")]
    NoLinks,
    #[error("weights must be row-standardized for this operation")]
    NotRowStandardized,
    #[error("insufficient neighbours with positive kernel weight at locations {0:?}")]
    InsufficientNeighbors(Vec<String>),
    #[error("effective number of parameters {trace:.4} leaves no room for AICc with n = {n}")]
    AiccUndefined { trace: f64, n: usize },
    #[error("objective is not finite anywhere on the search interval")]
    ObjectiveNotFinite,
    #[error("instrument cross-product is singular; spatial lag parameter not identified")]
    SingularInstruments,
    #[error("|rho| = {0} is not below 1; (I - rho W) is not invertible")]
    UnstableRho(f64),
    #[error("non-positive residual degrees of freedom ({0})")]
    NonPositiveDf(f64),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{path}: {message}")]
    Geometry { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
