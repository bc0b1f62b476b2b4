use thiserror::Error;

/// Errors surfaced by trace ingestion, preprocessing, training, and model I/O.
#[derive(Debug, Error)]
pub enum LqeError {
    /// The CSV header is missing a required column.
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    /// A data row could not be parsed; `line` is 1-based within the input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// An input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Training diverged or produced non-finite values.
    #[error("training error: {0}")]
    Training(String),

    /// A model stream had the wrong magic, version, or layout.
    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LqeError>;
