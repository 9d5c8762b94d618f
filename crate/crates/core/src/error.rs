use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid snapshot sequence: {0}")]
    InvalidSnapshots(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch for `{name}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),

    #[error("gradient root must be a 1x1 scalar, found {0}x{1}")]
    NonScalarRoot(usize, usize),

    #[error("malformed tape: {0}")]
    MalformedTape(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),

    #[error("loss is not deterministic: two baseline evaluations gave {0} and {1}")]
    NonDeterministicLoss(f64, f64),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("AUC undefined: need at least one positive and one negative label ({positives} positive, {negatives} negative)")]
    UndefinedAuc { positives: usize, negatives: usize },

    #[error("invalid cluster request: {0}")]
    InvalidClusters(String),

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("no events fall inside the requested windows")]
    EmptyAggregation,

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
