use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: dimensions, formats, architecture parameters.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// A network layer has no processing-element template.
    #[error("mapping error: no template for layer '{layer}' (kind '{kind}')")]
    Mapping { layer: String, kind: String },

    /// Operation requires a structurally valid graph.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("simulation deadlock at cycle {cycle}: {diagnostics}")]
    Deadlock { cycle: u64, diagnostics: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
