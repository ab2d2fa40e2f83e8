use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("record {index} ({row} -> {col}): weight {weight} is negative or not finite")]
    BadWeight {
        index: usize,
        row: String,
        col: String,
        weight: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of bounds for size {size}")]
    IndexOutOfBounds { index: usize, size: usize },

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear system solve failed: {0}")]
    SingularSystem(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("layer {layer} out of range (bottleneck index {max})")]
    LayerOutOfRange { layer: usize, max: usize },

    #[error("scores contain only one class")]
    SingleClass,

    #[error("zero rank variance: ranks of one argument are all tied")]
    ZeroRankVariance,

    #[error("entry not found: {0}")]
    NotFound(String),

    #[error("payload corrupted: digest mismatch for {name} v{version} (expected {expected}, got {got})")]
    Corruption {
        name: String,
        version: u64,
        expected: String,
        got: String,
    },

    #[error("registry lock for '{0}' is held by another publisher")]
    LockContended(String),

    #[error("pipeline validation failed: {0}")]
    Validation(String),

    #[error("step '{step}' failed: {source}")]
    StepFailed {
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
