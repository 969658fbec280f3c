use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field contains non-finite values ({context})")]
    DivergedField { context: String },

    #[error("grid mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("blow-up detected at t = {t_blowup:.6} (sup |u| = {sup:e})")]
    BlowUpDetected { t_blowup: f64, sup: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("jet of depth {depth} cannot provide time derivative of order {needed}")]
    MissingClosure { depth: usize, needed: usize },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv error: {0}")]
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
