// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("{0} contains no records")]
    EmptyFile(PathBuf),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no entry for id {0:?}")]
    Lookup(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("embedding failed for document {doc_id:?}: {source}")]
    Embedding {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("bad index file: {0}")]
    IndexFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
