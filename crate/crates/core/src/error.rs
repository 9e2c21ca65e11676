use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("need at least 2 distinct group labels, found {found}")]
    DegenerateLabels { found: usize },

    #[error("group `{0}` has no members")]
    EmptyGroup(String),

    #[error("cloud needs at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot compute a centroid of an empty point subset")]
    EmptySubset,

    #[error("centroids coincide; the projection line is undefined")]
    CoincidentCentroids,

    #[error("statistic needs two non-empty samples")]
    EmptyGroupInput,

    #[error("unknown group label `{0}`")]
    UnknownLabel(String),

    #[error("p-value {0} lies outside [0, 1]")]
    OutOfRangeP(f64),

    #[error("zero {axis} sum at {axis} {index}")]
    ZeroSum { axis: &'static str, index: usize },

    #[error("log normalization needs non-negative input, found {value} at ({row}, {column})")]
    NegativeInputForLog { row: usize, column: usize, value: f64 },

    #[error("row `{0}` has zero standard deviation")]
    ConstantRow(String),

    #[error("only {available} positive eigenvalues, {requested} components requested")]
    RankDeficient { requested: usize, available: usize },

    #[error("triangle vertices are collinear")]
    DegenerateTriangle,

    #[error("group `{label}` has {size} members, {requested} requested")]
    GroupTooSmall { label: String, size: usize, requested: usize },

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse { line: usize, column: String, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the error stems from the input data rather than from a
    /// numerical failure during computation.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::EmptySubset
                | Error::CoincidentCentroids
                | Error::EmptyGroupInput
                | Error::ConstantRow(_)
                | Error::RankDeficient { .. }
                | Error::DegenerateTriangle
        )
    }
}
