use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain on which the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Hurst index does not clear the existence threshold for the chosen noise.
    #[error("threshold violation: H = {hurst} does not satisfy {condition} (threshold {threshold})")]
    Threshold {
        hurst: f64,
        threshold: f64,
        condition: &'static str,
    },

    /// The operation is not defined for this kernel family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// No jitter in the schedule made the matrix factorizable.
    #[error("matrix is not positive semi-definite for any jitter in the schedule (last tried {last_jitter:e})")]
    NotPsd { last_jitter: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
