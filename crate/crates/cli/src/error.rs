use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot read {}: {source}", file.display())]
    Input {
        file: PathBuf,
        #[source]
        source: eitmem_core::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(eitmem_core::Error),

    #[error("cannot write {}: {source}", file.display())]
    Output {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Input { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Output { .. } => 1,
        }
    }
}

/// Attribute a core error to the config field that produced its inputs.
/// Parameter-domain failures become config errors; the rest are numerical.
pub fn at(path: &str) -> impl Fn(eitmem_core::Error) -> CliError + '_ {
    move |e| match e {
        eitmem_core::Error::InvalidParameter { .. } | eitmem_core::Error::OutOfRange { .. } => {
            CliError::config(path, e.to_string())
        }
        other => CliError::Numerical(other),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
