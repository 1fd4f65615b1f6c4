use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path enumeration exceeded the limit of {limit} paths")]
    PathLimit { limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("domain error while sampling node `{node}` at row {row}: {msg}")]
    SampleDomain {
        node: String,
        row: usize,
        msg: String,
    },

    #[error("fitting error: {0}")]
    Fit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for input/parse problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownNode(_)
            | Error::Cycle(_)
            | Error::InvalidArgument(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Csv(_) => 2,
            _ => 1,
        }
    }
}
