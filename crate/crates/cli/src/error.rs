use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Library(#[from] mdep_clt::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// 2 for usage and config problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// Library errors raised while building specs from a config.
    pub fn from_spec(e: mdep_clt::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
