use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants to exit codes: configuration, input and I/O
/// problems exit with 2, everything that happens while running a model
/// exits with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A multiplicative denominator fell below the 1e-9 floor.
    #[error("numerical degeneracy in {component}{}", bin_suffix(*.bin))]
    Degenerate { component: String, bin: Option<usize> },

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("fit: {0}")]
    Fit(String),

    #[error("search: {0}")]
    Search(String),
}

fn bin_suffix(bin: Option<usize>) -> String {
    match bin {
        Some(b) => format!(" at bin {b}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit code for the CLI: 2 for config/input problems, 3 for model failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Parse(_) | Error::Io { .. } => 2,
            _ => 3,
        }
    }

    /// Prefix the message with run context such as `(scenario, model, link)`.
    pub fn with_context(self, context: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{context}: {m}")),
            Error::Input(m) => Error::Input(format!("{context}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{context}: {m}")),
            Error::Degenerate { component, bin } => {
                Error::Degenerate { component: format!("{context}: {component}"), bin }
            }
            Error::Fit(m) => Error::Fit(format!("{context}: {m}")),
            Error::Search(m) => Error::Search(format!("{context}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
