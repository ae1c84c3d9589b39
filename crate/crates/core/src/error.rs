use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("index error in {op}: id {index} out of range for size {bound}")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss in stage {stage}, epoch {epoch}, batch {batch} (items {items:?})")]
    NonFinite {
        stage: u8,
        epoch: usize,
        batch: usize,
        items: Vec<String>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
