use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}: `{text}`")]
    Parse {
        line: usize,
        text: String,
        message: String,
    },

    #[error("{count} malformed line(s) in {path}:\n{details}")]
    ParseFile {
        path: PathBuf,
        count: usize,
        details: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("unknown {kind} symbol `{symbol}`")]
    UnknownSymbol { kind: &'static str, symbol: String },

    #[error("cyclic substitution through variable `{0}`")]
    CyclicSubstitution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
