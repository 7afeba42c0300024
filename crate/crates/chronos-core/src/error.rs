//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two objects live on different grids or basis dimensions.
    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operator shape cannot be used by this algorithm.
    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),

    /// A computation lost more accuracy than its contract allows.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The distribution variant does not support this operation
    /// (e.g. a pointwise density for a point mass).
    #[error("variant error: {0}")]
    Variant(String),

    /// The collapse density extends past the simulated time window.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A size cap would be exceeded (use the matrix-free form instead).
    #[error("resource limit: {0}")]
    Resource(String),

    /// A conditional density was requested where the marginal vanishes.
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),

    /// Observable name not in the menu.
    #[error("unknown observable `{name}`; valid: {valid}")]
    UnknownObservable { name: String, valid: String },

    /// A scenario file failed parsing or validation.
    #[error("scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }
}
