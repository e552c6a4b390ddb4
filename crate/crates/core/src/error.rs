use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A primitive produced a non-finite value (overflowing `exp`, `log 0`, division by zero).
    #[error("diverged evaluation in `{primitive}`: {detail}")]
    Diverged { primitive: String, detail: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("argument out of supported range: {0}")]
    Range(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn diverged(primitive: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Diverged {
            primitive: primitive.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
