use thiserror::Error;

/// Failure classes, each mapped to a distinct process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or missing inputs the user named (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Decode, I/O and numerical failures (exit 1).
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
    /// The gradient check could not construct valid cases (exit 3).
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

impl From<iaclahe::Error> for CliError {
    fn from(e: iaclahe::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::from(iaclahe::Error::NonFiniteGradient).exit_code(),
            1
        );
        assert_eq!(CliError::Environment("x".into()).exit_code(), 3);
    }
}
