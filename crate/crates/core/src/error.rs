use thiserror::Error;

/// Errors raised across the crate.
///
/// Each variant maps onto one of the stable process exit codes, see
/// [`PanError::exit_code`].
#[derive(Debug, Error)]
pub enum PanError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("timeslot {t} is below the earliest valid timeslot {min}")]
    Range { t: usize, min: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl PanError {
    /// 2 input/config, 3 numerical, 4 artifact mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            PanError::Config(_) | PanError::Data(_) | PanError::Range { .. } | PanError::Io(_) => 2,
            PanError::Numerical(_) => 3,
            PanError::Mismatch(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, PanError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PanError::Config(msg.into()))
}
