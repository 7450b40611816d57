//! Training loop, cross-validation, the ablation grid and batch scoring.

mod config;
mod cv;
mod record;
mod score;
mod trainer;

use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::data::DataError;
use crate::metrics::MetricsError;
use crate::model::{CheckpointError, ModelError};
use crate::optim::OptimError;

pub use config::{AblationId, Selection, TrainConfig};
pub use cv::{cross_validate, mean_std, run_ablation, AblationRow, AblationTable, CvResult};
pub use record::{report_body, EpochRecord, RunRecord};
pub use score::{score_checkpoint, score_videos, ScoreOutput, ScoredVideo};
pub use trainer::{predict_indices, train, tree_sum, write_report, RunSplits, TrainJob, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss or gradient) at epoch {epoch}, step {step}; last good checkpoint: {}", checkpoint.as_ref().map_or("none".to_string(), |p| p.display().to_string()))]
    Divergence {
        epoch: usize,
        step: usize,
        checkpoint: Option<PathBuf>,
    },
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("{0}")]
    Config(String),
    #[error("fold assignment: {0}")]
    Folds(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Optim(OptimError),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
