//! Feature persistence, manifests, fold assignment, class-balanced
//! sampling and the synthetic task generator.

mod dataset;
mod features;
mod folds;
mod manifest;
mod sampler;
mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ScoreSchema;

pub use dataset::{load_dataset, Dataset, Example};
pub use features::{
    decode_aff1, encode_aff1, read_features, write_features, FeatureSequence, FeatureSource, AFF1_HEADER_LEN,
    AFF1_MAGIC, AFF1_VERSION,
};
pub use folds::{make_folds, per_fold_class_counts};
pub use manifest::{
    fold_histogram, format_manifest, load_manifest, parse_manifest, read_manifest, write_manifest, LabeledVideo,
    Split, MANIFEST_HEADER,
};
pub use sampler::WeightedSampler;
pub use synthetic::{generate_synthetic, write_synthetic, SyntheticDataset, SyntheticTaskSpec, TaskKind};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("corrupt feature file at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest row {row}: {reason}")]
    Manifest { row: usize, reason: String },
    #[error("manifest row {row}: {schema} score {value} outside {}..={}", schema.min_score(), schema.max_score())]
    ScoreRange { row: usize, schema: ScoreSchema, value: i64 },
    #[error("manifest row {row}: feature file {} does not exist", path.display())]
    MissingFeatures { row: usize, path: PathBuf },
    #[error("no training examples for {schema} class(es) {classes:?}")]
    EmptyClass { schema: ScoreSchema, classes: Vec<usize> },
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
