use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// `2` for bad configuration, `1` for anything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<sketchlord::LordError> for CliError {
    fn from(e: sketchlord::LordError) -> Self {
        match e {
            sketchlord::LordError::Config(msg) => CliError::Config(msg),
            sketchlord::LordError::Domain(msg) => CliError::Config(msg),
            sketchlord::LordError::TooLarge { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
