use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{stage}{}: {source}", run.map(|r| format!(" (run {r})")).unwrap_or_default())]
    Compute {
        stage: &'static str,
        run: Option<usize>,
        source: anatpaste_core::Error,
    },
}

impl CliError {
    /// Process exit status.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 2 | configuration or usage |
    /// | 3 | file I/O |
    /// | 4 | computation |
    /// | 5 | malformed input file |
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Compute { .. } => 4,
            CliError::Parse { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a stage name (and run index) to core errors.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str, run: Option<usize>) -> CliResult<T>;
}

impl<T> StageContext<T> for anatpaste_core::Result<T> {
    fn stage(self, stage: &'static str, run: Option<usize>) -> CliResult<T> {
        self.map_err(|source| CliError::Compute { stage, run, source })
    }
}
