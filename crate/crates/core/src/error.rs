use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numeric failure in {what}: achieved tolerance {achieved:e}")]
    Numeric { what: &'static str, achieved: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid generator: {0}")]
    Validation(String),

    #[error("bridge undefined: P({from} -> * -> {to}) has zero mass")]
    BridgeUndefined { from: usize, to: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
