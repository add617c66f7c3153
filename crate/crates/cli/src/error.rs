use thiserror::Error;

/// Exit code for a bad configuration, unreadable input or unwritable output.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failure (divergence, NaN, degenerate data).
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] quantsc::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        let numerical = |e: &quantsc::Error| matches!(e, quantsc::Error::Numerical(_) | quantsc::Error::Degenerate(_));
        match self {
            CliError::Core(e) if numerical(e) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}
