use thiserror::Error;

/// Errors raised by the estimation, testing and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The regression has no more rows than columns.
    #[error("underdetermined design: {rows} rows for {cols} columns (need rows > cols)")]
    Underdetermined { rows: usize, cols: usize },

    /// The design or a derived matrix is numerically singular.
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    /// Input data contained NaN or infinite values.
    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    /// A numerical pipeline produced an unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error comes from configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::NonFinite(_) | Error::Underdetermined { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
