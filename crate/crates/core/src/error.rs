use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog is missing required column `{0}`")]
    MissingColumn(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("coordinate ({lat}, {lon}) lies outside the grid extent")]
    OutOfExtent { lat: f64, lon: f64 },

    #[error("non-finite magnitude {0}")]
    NonFiniteMagnitude(f64),

    #[error("time span is shorter than one period of {period_days} days")]
    SpanTooShort { period_days: u32 },

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid feature spec: {0}")]
    InvalidFeatureSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("node `{0}` has an empty attention neighborhood")]
    EmptyNeighborhood(usize),

    #[error("training diverged at epoch {epoch} (loss trace: {trace:?})")]
    Diverged { epoch: usize, trace: Vec<f64> },

    #[error("forecast coverage gaps ({} missing), first: {}", .0.len(), .0.iter().take(5).map(|(b, p)| format!("(bin {b}, period {p})")).collect::<Vec<_>>().join(", "))]
    CoverageGaps(Vec<(usize, usize)>),

    #[error("ROC skill undefined: {0}")]
    UndefinedSkill(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
