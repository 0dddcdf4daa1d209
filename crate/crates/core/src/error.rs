use thiserror::Error;

/// Errors raised anywhere in the estimation and training pipeline.
#[derive(Debug, Error)]
pub enum SurvError {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema error at row {row}, column {column}: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid weight {value} for subject {subject} at time {time}")]
    InvalidWeight { subject: usize, time: f64, value: f64 },

    #[error("interval too late: risk set < 2 (interval {interval}, at risk {at_risk})")]
    RiskSetTooSmall { interval: usize, at_risk: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no target events to fit")]
    NoEvents,

    #[error("cox did not converge after {iterations} iterations (gradient {gradient:e})")]
    CoxNotConverged { iterations: usize, gradient: f64 },

    #[error("gee did not converge after {0} iterations")]
    GeeNotConverged(usize),

    #[error("diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("censoring support exhausted at time {0}")]
    CensoringSupportExhausted(f64),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SurvError {
    /// True when the failure comes from the numerics rather than from the
    /// caller's input. The command line maps this to a distinct exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SurvError::CoxNotConverged { .. }
                | SurvError::GeeNotConverged(_)
                | SurvError::Diverged { .. }
                | SurvError::CensoringSupportExhausted(_)
                | SurvError::Calibration(_)
                | SurvError::InvalidWeight { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SurvError>;
