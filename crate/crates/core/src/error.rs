use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("templates have empty meet at cell {cell}")]
    EmptyMeet { cell: usize },

    /// A search or enumeration ran out of its node budget. `partial` is the
    /// count accumulated before the cut-off.
    #[error("resource limit exceeded after {explored} nodes (partial count {partial})")]
    ResourceLimit { explored: u64, partial: u128 },

    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unknown identifier `{0}`")]
    UnknownId(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
