use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("schema error in {path}: {msg}")]
    Schema { path: PathBuf, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("timestamp {t} outside grid horizon [{start}, {end})")]
    OutOfHorizon { t: f64, start: f64, end: f64 },

    #[error("series are not on the same grid: {0}")]
    GridMismatch(String),

    #[error("invalid series: {0}")]
    Series(String),

    #[error("design matrix is rank deficient, dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),
}

pub type Result<T> = std::result::Result<T, Error>;
