use thiserror::Error;

/// Errors raised by the library.
///
/// Structural problems (wrong shapes, out-of-range parameters) are errors;
/// a tensor that merely fails a numerical audit is reported through the
/// audit's report type instead.
#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("scenario mismatch: expected n = {expected}, got n = {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid measurement basis: {0}")]
    InvalidBasis(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("certificate mismatch: {0}")]
    CertificateMismatch(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
