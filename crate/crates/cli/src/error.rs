use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {message}")]
    ConfigParse { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Table { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] rarefy_core::Error),
    #[error("`--only {0}` matches no check")]
    UnknownCheck(String),
    #[error("unknown mutation `{0}` (expected kernel, data or flux)")]
    UnknownMutation(String),
}
