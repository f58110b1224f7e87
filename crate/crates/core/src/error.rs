use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwinError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("alpha is undefined when the twin's drift is zero")]
    UndefinedAlpha,
    #[error("unsupported similarity: alpha = {0} must be positive")]
    UnsupportedSimilarity(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, TwinError>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(TwinError::InvalidArgument(msg()))
    }
}
