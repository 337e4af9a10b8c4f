use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtfsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("estimator `{estimator}` failed: {source}")]
    Estimator {
        estimator: String,
        #[source]
        source: Box<OtfsError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OtfsError>;

pub(crate) fn dim_err(msg: impl Into<String>) -> OtfsError {
    OtfsError::Dimension(msg.into())
}

pub(crate) fn cfg_err(msg: impl Into<String>) -> OtfsError {
    OtfsError::Config(msg.into())
}
