use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("stream error: {0}")]
    Stream(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported WAV: {0}")]
    Wav(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, flags, config) rather
    /// than failures while running a model.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Wav(_) | Error::Io { .. } | Error::Schema(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
