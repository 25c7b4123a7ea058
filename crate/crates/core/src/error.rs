use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("source violates standoff: {0}")]
    Standoff(String),
    #[error("point outside admissible region: {0}")]
    OutsideDomain(String),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("source is not smooth enough: {0}")]
    NotSmooth(String),
    #[error("stability condition violated: {0}")]
    Cfl(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
