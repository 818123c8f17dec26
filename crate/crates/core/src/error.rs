use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("timestamp {time} s lies outside the window [0, {window} s)")]
    TimestampOutOfRange { time: f64, window: f64 },

    #[error("log duration {duration} s is shorter than one window of {window} s")]
    DurationTooShort { duration: f64, window: f64 },

    #[error("empty RSS trace")]
    EmptyTrace,

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("trace window is {trace} s but the detector expects {expected} s")]
    WindowMismatch { trace: f64, expected: f64 },

    #[error("sequence length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("cannot superpose an empty list of sequences")]
    EmptySuperposition,

    #[error("class {class} needs {class} distinct originals but only {available} were given")]
    InfeasibleClass { class: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty list of (real, estimated) pairs")]
    EmptyPairs,

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("model is corrupt: {0}")]
    CorruptModel(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
