use thiserror::Error;

/// Errors raised by sketch construction, estimation and bound computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent user input.
    #[error("invalid input: {0}")]
    Input(String),

    /// The sketch lacks state the operation depends on.
    #[error("sketch state error: {0}")]
    State(String),

    /// The operation is not defined for this sketch family or size.
    #[error("unsupported: {0}")]
    Capability(String),

    /// A serialized document or CSV file could not be read.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A predicate could not be evaluated on an item.
    #[error("predicate evaluation failed on item `{item}`: {message}")]
    Evaluation { item: String, message: String },

    /// A numerical routine did not meet its contract.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
