use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("Onsager schedule is missing b[{t},{s}]")]
    MissingCoefficient { t: usize, s: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("state evolution covariance at t={t} is not PSD (min pivot {pivot:.3e}); consider a larger diagonal jitter")]
    NotPsd { t: usize, pivot: f64 },

    #[error("evaluation budget exceeded: {0}")]
    Budget(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
