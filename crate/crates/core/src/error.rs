use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into two families: configuration problems (bad input,
/// I/O, malformed JSON) and numerical guards that mirror a hypothesis of the
/// underlying estimates (index conditions, resolution, compatibility).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("index guard: {0}")]
    IndexGuard(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("compatibility error: {0}")]
    Compatibility(String),
    #[error("singular symbol: {0}")]
    SingularSymbol(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for guards that encode a hypothesis of the estimates rather than
    /// malformed input.
    pub fn is_numerical_guard(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
