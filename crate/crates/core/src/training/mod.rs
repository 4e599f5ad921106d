//! Adadelta training with early stopping, and the γ_aes sweep.

mod adadelta;
mod record;
mod sweep;
mod trainer;

pub use adadelta::{AdadeltaState, ADADELTA_EPS, ADADELTA_RHO};
pub use record::{EpochRecord, StopReason, TrainRecord};
pub use sweep::{
    default_grid, format_row, format_sweep, parse_sweep, sweep_gamma, validate_sweep, SweepRow,
    SweepSummary,
};
pub use trainer::{
    train, CorpusEvaluator, DevEvaluator, DevMetrics, EarlyStopping, Encoded, Selection,
    TrainConfig, TrainOutcome, Trainer,
};

use crate::metrics::MetricError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("non-finite training loss {0}")]
    NonFiniteLoss(f64),
    #[error("non-finite gradient for {0}")]
    NonFiniteGradient(String),
    #[error("{0} corpus is empty")]
    EmptyCorpus(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("sweep line {line}: {message}")]
    SweepFormat { line: usize, message: String },
}
