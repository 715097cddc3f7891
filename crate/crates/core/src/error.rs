use thiserror::Error;

/// Errors raised anywhere in the ingest → extract → train → evaluate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid track `{id}`: {message}")]
    InvalidTrack { id: String, message: String },

    #[error("year ranges overlap: train {train_start}-{train_end}, test {test_start}-{test_end}")]
    OverlappingYears {
        train_start: i32,
        train_end: i32,
        test_start: i32,
        test_end: i32,
    },

    #[error("cannot fit normalization bounds: {0}")]
    DegenerateBounds(String),

    #[error("window has {actual} values, expected {expected}")]
    WindowLength { expected: usize, actual: usize },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("ROC needs both classes, no {0} windows present")]
    SingleClass(&'static str),

    #[error("at least 2 runs are needed for a standard deviation, got {0}")]
    TooFewRuns(usize),

    #[error("{failed} of {total} runs failed: {first}")]
    RunsFailed {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which pipeline stage an error belongs to; the CLI maps these to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Io,
    Parse,
    Extraction,
    Training,
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::Record { .. }
            | Error::MissingColumn(_)
            | Error::InvalidTrack { .. }
            | Error::Csv(_)
            | Error::Json(_) => Stage::Parse,
            Error::OverlappingYears { .. }
            | Error::DegenerateBounds(_)
            | Error::WindowLength { .. } => Stage::Extraction,
            Error::Topology(_)
            | Error::EmptyTrainingSet
            | Error::EmptyEvaluationSet
            | Error::SingleClass(_)
            | Error::TooFewRuns(_)
            | Error::RunsFailed { .. } => Stage::Training,
            Error::Config(_) | Error::Io(_) => Stage::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
