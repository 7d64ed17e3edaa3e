use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("{0}")]
    Domain(String),

    #[error("alphabet size mismatch: {left} has q={left_q}, {right} has q={right_q}")]
    AlphabetMismatch {
        left: &'static str,
        left_q: usize,
        right: &'static str,
        right_q: usize,
    },

    #[error("exhaustive search over q={q} needs {candidates} candidates; refusing above q={limit}")]
    SearchTooLarge {
        q: usize,
        candidates: u128,
        limit: usize,
    },

    #[error("role mismatch: result is `{result}` but spectrum is `{spectrum}`")]
    RoleMismatch { result: String, spectrum: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
