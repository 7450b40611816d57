//! The sequence classifier: positional encoding, transformer encoder,
//! pooling aggregators and the dense severity head.

mod checkpoint;
mod config;
pub mod layers;
mod network;
mod params;
mod schema;

use thiserror::Error;

use crate::config::ConfigError;
use crate::tensor::TensorError;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError,
    CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{Aggregator, ModelConfig, LAYER_NORM_EPS};
pub use layers::{
    attention_matrix, attention_mil_aggregate, encoder_layer, multi_head_attention, positional_encoding,
    scaled_dot_attention, EncoderParams, HeadParams, Linear, MhaParams, MilParams, Mode, Norm,
};
pub use network::{predict, AttentionTrace, Model, Prediction, TapeForward};
pub use params::ParamStore;
pub use schema::ScoreSchema;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("feature dimension mismatch: model expects D={expected}, video has D={actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("empty bag: a video needs at least one frame")]
    EmptyBag,
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameter layout mismatch: {0}")]
    Parameters(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<ConfigError> for ModelError {
    fn from(e: ConfigError) -> Self {
        ModelError::Config(e.to_string())
    }
}
