use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("output directory {0} is locked by another run (delete {lock} there if none is active)", lock = crate::output::LOCK_FILE)]
    Locked(String),

    #[error(transparent)]
    Core(#[from] lossless_core::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for usage problems, 3 for inconclusive numerics, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Locked(_) => 2,
            CliError::Core(lossless_core::Error::Inconclusive(_)) => 3,
            CliError::Core(
                lossless_core::Error::InvalidParameter(_)
                | lossless_core::Error::InvalidGrid(_)
                | lossless_core::Error::DimensionMismatch(_),
            ) => 2,
            _ => 1,
        }
    }
}
