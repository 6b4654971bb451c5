use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model parameters violate a structural requirement.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(
        "root finder did not converge after {iterations} iterations \
         (bracket [{lo}, {hi}], f(lo) = {f_lo}, f(hi) = {f_hi})"
    )]
    RootNotConverged {
        iterations: usize,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A numerical procedure produced a non-finite or inconsistent value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed configuration, request, or model file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
