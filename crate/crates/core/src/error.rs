use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),

    #[error("sequence of length {len} exceeds max_positions {max}")]
    Overlength { len: usize, max: usize },

    #[error("checkpoint error at byte {offset}: {message}")]
    Checkpoint { offset: u64, message: String },

    #[error("fp16 overflow in tensors: {}", .0.join(", "))]
    Fp16Overflow(Vec<String>),

    #[error("corpus {path}: {message}")]
    Corpus { path: PathBuf, message: String },

    #[error("scorer `{scorer}`: {message}")]
    Scorer { scorer: String, message: String },

    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Stable snake_case name of the variant, for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::UnknownLanguage(_) => "unknown_language",
            Error::Overlength { .. } => "overlength",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Fp16Overflow(_) => "fp16_overflow",
            Error::Corpus { .. } => "corpus",
            Error::Scorer { .. } => "scorer",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
