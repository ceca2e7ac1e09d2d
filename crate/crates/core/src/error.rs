use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("need at least {required} good channels, have {available}")]
    InsufficientChannels { required: usize, available: usize },

    #[error("degenerate fluctuations: {0}")]
    DegenerateFluctuations(String),

    #[error("signal too short for wavelet level {level}: length {length} < filter length {filter}")]
    SignalTooShort { level: usize, length: usize, filter: usize },

    #[error("non-finite feature in epoch {epoch} (subject {subject_id}, song {song_id}), channel {channel}, feature {feature}")]
    NonFiniteFeature {
        epoch: usize,
        subject_id: u32,
        song_id: u32,
        channel: usize,
        feature: String,
    },

    #[error("width mismatch: expected {expected} features, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("unsupported for {kind} models: {what}")]
    Unsupported { kind: String, what: String },

    #[error("stratum (subject {subject_id}, song {song_id}) with {size} epochs is too small for test fraction {fraction}")]
    StratumTooSmall {
        subject_id: u32,
        song_id: u32,
        size: usize,
        fraction: f64,
    },

    #[error("empty test set")]
    EmptyTestSet,

    #[error("split plan {0} has already been consumed; pass --force to evaluate again")]
    PlanConsumed(PathBuf),

    #[error("step `{step}` failed: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("length mismatch in {path}: expected {expected} bytes, found {actual}")]
    LengthMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            row,
            message: message.into(),
        }
    }

    pub(crate) fn in_step(self, step: &'static str) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
