use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line tool: 1 usage/config,
    /// 2 data/format, 3 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InvalidSpec(_) | Error::Config(_) => 1,
            Error::Parse { .. }
            | Error::Format(_)
            | Error::InvalidInput(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::InvalidMoments(_) | Error::Domain(_) => 3,
        }
    }
}
