use thiserror::Error;

/// Errors raised across the library.
///
/// The variants map onto the CLI exit-code classes: capacity problems are
/// kept distinct so callers can report the required cap.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("capacity error: {what} requires {required}, cap is {cap}")]
    Capacity {
        what: String,
        required: u128,
        cap: u128,
    },

    #[error("size limit exceeded: n = {n}, limit = {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("build error: {0}")]
    Build(String),

    #[error("direction search failed: {0}")]
    SearchFailure(String),

    #[error("power-sum inversion failed: {0}")]
    InversionFailure(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by a configured limit being too small.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. } | Error::SizeLimit { .. } | Error::SearchFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
