use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{name}`: {reason}")]
    InvalidName { name: String, reason: &'static str },
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("unknown variable name `{0}`")]
    UnknownVariableName(String),
    #[error("invalid bounds for `{name}`: {reason}")]
    InvalidBounds { name: String, reason: &'static str },
    #[error("integer variable `{0}` must have finite bounds")]
    UnboundedInteger(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MilpError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        MilpError::Parse {
            line,
            message: message.into(),
        }
    }
}
