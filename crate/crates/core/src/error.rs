use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied parameters does not hold.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The scene cannot be meshed as requested.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// A file could not be decoded; `section` names the part that failed.
    #[error("parse error in {section}: {message}")]
    Parse { section: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(section: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse { section: section.into(), message: message.to_string() }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "validation",
            Error::Mesh(_) => "mesh",
            Error::Parse { .. } => "parse",
            Error::Numerical(_) => "numerical",
            Error::NoConvergence(_) => "convergence",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::NoConvergence(_) => 3,
            _ => 2,
        }
    }
}
