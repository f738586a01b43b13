use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape preconditions (matmul, forward, mse, backprop, ...).
    #[error("{op}: dimension mismatch: {lhs} vs {rhs}")]
    DimMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// Non-finite value where the contract requires finite data.
    #[error("{op}: non-finite value {value} in {what} at index {index}")]
    NonFinite {
        op: &'static str,
        what: &'static str,
        value: f64,
        index: usize,
    },

    /// Non-finite gradient handed to the optimizer; names the parameter block.
    #[error("adadelta_step: non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error(
        "network has {d_in} inputs and {d_out} outputs; piece extraction needs a \
         1-input 1-output network — restrict it to a line first \
         (restrict_to_line, or --line on the CLI)"
    )]
    NotOneDimensional { d_in: usize, d_out: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown experiment {name:?}; expected one of {known}")]
    UnknownExperiment { name: String, known: &'static str },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {msg}")]
    ParseFile {
        path: String,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Error::DimMismatch {
            op,
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
