use std::path::Path;

use textloc_core::Error as CoreError;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad flags, bad config values or an impossible request.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed input files, failed writes.
    #[error("{0}")]
    Data(String),
    /// Training hit a non-finite loss.
    #[error("{0}")]
    Numeric(String),
    /// Stopped by Ctrl-C after writing a final checkpoint.
    #[error("interrupted at step {step}; checkpoint written to {checkpoint}")]
    Interrupted { step: u64, checkpoint: String },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Numeric(_) => 3,
            AppError::Interrupted { .. } => 130,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Data(msg.into())
    }

    /// Wraps an IO error with the path it concerns.
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        AppError::Data(format!("{}: {err}", path.display()))
    }

    /// Core error raised while handling `context` (a file or flag name).
    pub fn core(context: impl std::fmt::Display, err: CoreError) -> Self {
        match err {
            CoreError::NonFinite { .. } => AppError::Numeric(format!("{context}: {err}")),
            CoreError::Parse { .. } => AppError::Data(format!("{context}: {err}")),
            CoreError::InvalidArgument(_) => AppError::Usage(format!("{context}: {err}")),
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;
