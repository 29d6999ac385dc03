use thiserror::Error;

/// Errors produced by the library.
///
/// Row numbers are 1-based data rows (the header is not counted).
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },

    #[error("non-positive or non-finite time at row {0}")]
    NonPositiveTime(usize),

    #[error("event code at row {0} is not 0 or 1")]
    InvalidEventCode(usize),

    #[error("feature {0} has zero standard deviation")]
    ConstantFeature(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("no events in outcome")]
    NoEvents,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid does not match dataset: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("all penalty weights are zero")]
    AllWeightsZero,

    #[error("invalid penalty weights: {0}")]
    InvalidWeights(String),

    #[error("fold {0} contains no events")]
    FoldWithoutEvents(usize),

    #[error("cut-point report is empty")]
    EmptyReport,

    #[error("refit design is singular: {0}")]
    SingularRefit(String),

    #[error("AIC requires an unpenalized fit (lambda = {0})")]
    PenalizedFitRejected(f64),

    #[error("no comparable pairs for concordance")]
    NoComparablePairs,

    #[error("censoring Kaplan-Meier estimate reaches zero at t = {0}")]
    DegenerateCensoringKm(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
