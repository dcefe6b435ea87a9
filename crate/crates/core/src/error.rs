use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wav decode error in {chunk} chunk: {reason}")]
    Decode { chunk: &'static str, reason: String },

    #[error("not a RIFF container")]
    NotRiff,

    #[error("silent input")]
    SilentInput,

    #[error("empty buffer")]
    EmptyBuffer,

    #[error("window [{start:.3} s, {end:.3} s) exceeds available duration {available:.3} s")]
    Range { start: f64, end: f64, available: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature {feature}: {source}")]
    Feature {
        feature: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("label {0} has fewer than 2 samples")]
    TooFewSamples(String),

    #[error("need at least 2 labels")]
    TooFewLabels,

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_feature(self, feature: &'static str) -> Self {
        Error::Feature {
            feature,
            source: Box::new(self),
        }
    }

    /// True for errors caused by malformed inputs or schemas rather than
    /// data that could not be processed.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema(_) | Error::UnknownLabel(_) | Error::Dimension { .. }
        )
    }
}
