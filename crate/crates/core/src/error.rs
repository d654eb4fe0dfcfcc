use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid treatment code at row {row}: {value}")]
    InvalidTreatment { row: usize, value: f64 },

    #[error("dimension mismatch at row {row}: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        row: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row} in {field}")]
    NonFinite { row: usize, field: String },

    #[error("cannot parse {column} at row {row}: `{value}`")]
    Parse { row: usize, column: String, value: String },

    #[error("bad column layout: {0}")]
    Schema(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("treatment {stage} takes a single value in the data; both arms are required")]
    SingleArm { stage: &'static str },

    #[error("rank-deficient design; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("logistic fit diverged (coefficient norm {norm:.3e}); data appear separable")]
    Separation { norm: f64 },

    #[error("outcome indicator has a single class; threshold {threshold} does not split the data")]
    SingleClass { threshold: f64 },

    #[error("bracket expansion failed after {doublings} doublings")]
    BracketFailure { doublings: usize },

    #[error("empty consistent subgroup")]
    EmptyConsistentSubgroup,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("cannot open {path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad data or
    /// bad arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NoConvergence { .. }
                | Error::Separation { .. }
                | Error::BracketFailure { .. }
                | Error::Degenerate(_)
        )
    }
}
