use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("block index {requested} beyond grid resolution (resolvable j_max = {j_max})")]
    BlockOutOfRange { requested: i32, j_max: i32 },

    #[error("time step {dt} violates stability gate; need dt <= {required}")]
    StabilityGate { dt: f64, required: f64 },

    #[error("exponent r = {r} outside admissible interval ({low}, {high})")]
    Inadmissible { r: f64, low: f64, high: f64 },

    #[error("cutoff radius {eps} not resolvable; need eps > {min}")]
    Unresolved { eps: f64, min: f64 },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
