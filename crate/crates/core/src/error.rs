use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A persisted artifact failed to parse. `offset` is the byte (or, for
    /// text formats, line) position at which parsing stopped.
    #[error("malformed {format} at offset {offset}: {reason}")]
    Format {
        format: &'static str,
        offset: u64,
        reason: String,
    },

    #[error("pcap record {index} is truncated: {reason}")]
    Truncated { index: usize, reason: String },

    #[error("frame {index} is {len} bytes, exceeds the 65535-byte limit")]
    OversizedFrame { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("artifact mismatch: {0}")]
    Consistency(String),

    #[error("token stream has no trainable windows: {0}")]
    NoTrainableWindows(String),

    #[error("training diverged at step {step} on {file}: loss = {loss}")]
    Divergence {
        file: String,
        step: usize,
        loss: f64,
    },

    #[error("model is not fitted: {0}")]
    NotFitted(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("phase `{phase}` failed on {file}: {source}")]
    Phase {
        phase: &'static str,
        file: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            offset,
            reason: reason.into(),
        }
    }

    /// Tags an error with the pipeline phase and file it came from.
    pub fn in_phase(self, phase: &'static str, file: impl Into<String>) -> Self {
        match self {
            already @ Error::Phase { .. } => already,
            other => Error::Phase {
                phase,
                file: file.into(),
                source: Box::new(other),
            },
        }
    }
}
