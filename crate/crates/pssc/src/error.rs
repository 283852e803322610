use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsscError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("training diverged at epoch {epoch}: {term} became non-finite")]
    Divergence { epoch: usize, term: String },

    #[error("ingestion error in {path} at byte {offset}: {reason}")]
    Ingestion {
        path: String,
        offset: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PsscError>;

impl PsscError {
    pub fn contract(msg: impl Into<String>) -> Self {
        PsscError::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        PsscError::Config(msg.into())
    }

    /// Process exit code for the CLI: 1 for configuration problems,
    /// 2 for runtime/divergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PsscError::Config(_) => 1,
            _ => 2,
        }
    }
}
