use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },

    #[error("session {session}: {msg}")]
    Session { session: String, msg: String },

    #[error("dataset inconsistent: {0}")]
    Dataset(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("timestamp {t} not after previous {prev}")]
    NonIncreasingTimestamp { t: f64, prev: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gaze ray does not reach the camera plane")]
    NoIntersection,

    #[error("no device cluster: every point is noise")]
    NoDeviceCluster,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("solver did not converge, final gap {gap:e}")]
    NotConverged { gap: f64 },

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
