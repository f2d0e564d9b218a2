use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LfsmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate increment: {0}")]
    DegenerateIncrement(String),
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
    #[error("unreliable confidence region: {failed} of {total} re-fits failed")]
    UnreliableRegion { failed: usize, total: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl LfsmError {
    /// Errors caused by bad user input, as opposed to an estimator giving up.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LfsmError::InvalidParameter(_)
                | LfsmError::Config(_)
                | LfsmError::Parse { .. }
                | LfsmError::InsufficientData { .. }
                | LfsmError::Io(_)
                | LfsmError::Resource(_)
        )
    }
}

impl From<std::io::Error> for LfsmError {
    fn from(e: std::io::Error) -> Self {
        LfsmError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LfsmError {
    fn from(e: serde_json::Error) -> Self {
        LfsmError::Parse {
            line: e.line(),
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LfsmError>;
