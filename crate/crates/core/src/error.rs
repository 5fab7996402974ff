use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        /// `line N` for text formats, `offset N` for binary ones.
        location: String,
        message: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("no plane satisfies the orientation constraint after {iterations} hypotheses")]
    NoPlane { iterations: usize },

    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("score grid load failed: {0}")]
    ScoreLoad(String),

    #[error("degenerate uncertain set: {0}")]
    DegenerateSet(String),

    #[error("image encoding failed: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse_line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub(crate) fn parse_offset(path: impl Into<PathBuf>, offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            location: format!("offset {offset}"),
            message: message.into(),
        }
    }
}
