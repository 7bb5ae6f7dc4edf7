use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain where the operation is defined.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Invalid model parameters or configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{solver} did not converge within {iterations} iterations")]
    NoConvergence { solver: &'static str, iterations: usize },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
