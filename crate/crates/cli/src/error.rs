use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("config error in [{section}] {key}{}: {message}", line_suffix(*line))]
    Config {
        section: String,
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] pixiso_core::Error),

    #[error("{0}")]
    Refused(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => " (default)".into(),
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
