use std::fmt;
use std::str::FromStr;

use crate::config::{self, ConfigError, Section};

use super::ScoreSchema;

/// How frame embeddings are pooled into one video embedding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregator {
    #[default]
    AttentionMil,
    Average,
    Max,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::AttentionMil => "attention_mil",
            Aggregator::Average => "average",
            Aggregator::Max => "max",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attention_mil" => Ok(Aggregator::AttentionMil),
            "average" => Ok(Aggregator::Average),
            "max" => Ok(Aggregator::Max),
            other => Err(format!(
                "unknown aggregator `{other}` (expected attention_mil, average or max)"
            )),
        }
    }
}

/// Architecture switches and hyperparameters of the sequence classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_hidden: usize,
    pub dropout_encoder: f64,
    pub dropout_head: f64,
    pub use_positional_encoding: bool,
    pub use_transformer: bool,
    pub aggregator: Aggregator,
    pub mil_hidden: usize,
    pub schema: ScoreSchema,
    /// Keep every `frame_stride`-th frame.
    pub frame_stride: usize,
    /// Hard cap on frames after striding; longer videos are subsampled uniformly.
    pub max_frames: usize,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 768,
            num_layers: 2,
            num_heads: 4,
            ffn_hidden: 4096,
            dropout_encoder: 0.25,
            dropout_head: 0.5,
            use_positional_encoding: true,
            use_transformer: true,
            aggregator: Aggregator::AttentionMil,
            mil_hidden: 128,
            schema: ScoreSchema::Mes,
            frame_stride: 1,
            max_frames: 4096,
        }
    }
}

impl ModelConfig {
    /// A reduced configuration for tests and desk-scale experiments.
    pub fn small(feature_dim: usize, schema: ScoreSchema) -> Self {
        Self {
            feature_dim,
            ffn_hidden: 4 * feature_dim,
            mil_hidden: (feature_dim / 2).max(4),
            schema,
            ..Self::default()
        }
    }

    pub fn num_classes(&self) -> usize {
        self.schema.num_classes()
    }

    pub fn head_dim(&self) -> usize {
        self.feature_dim / self.num_heads
    }

    /// Frame indices kept for a video of `n` frames.
    pub fn select_frames(&self, n: usize) -> Vec<usize> {
        let strided: Vec<usize> = (0..n).step_by(self.frame_stride.max(1)).collect();
        if strided.len() <= self.max_frames {
            return strided;
        }
        let len = strided.len();
        (0..self.max_frames).map(|i| strided[i * len / self.max_frames]).collect()
    }
}

impl Section for ModelConfig {
    const NAME: &'static str = "model";

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("feature_dim", self.feature_dim.to_string()),
            ("num_layers", self.num_layers.to_string()),
            ("num_heads", self.num_heads.to_string()),
            ("ffn_hidden", self.ffn_hidden.to_string()),
            ("dropout_encoder", config::float(self.dropout_encoder)),
            ("dropout_head", config::float(self.dropout_head)),
            ("use_positional_encoding", self.use_positional_encoding.to_string()),
            ("use_transformer", self.use_transformer.to_string()),
            ("aggregator", config::string(self.aggregator)),
            ("mil_hidden", self.mil_hidden.to_string()),
            ("schema", config::string(self.schema)),
            ("frame_stride", self.frame_stride.to_string()),
            ("max_frames", self.max_frames.to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        match key {
            "feature_dim" => self.feature_dim = config::as_usize(key, v)?,
            "num_layers" => self.num_layers = config::as_usize(key, v)?,
            "num_heads" => self.num_heads = config::as_usize(key, v)?,
            "ffn_hidden" => self.ffn_hidden = config::as_usize(key, v)?,
            "dropout_encoder" => self.dropout_encoder = config::as_f64(key, v)?,
            "dropout_head" => self.dropout_head = config::as_f64(key, v)?,
            "use_positional_encoding" => self.use_positional_encoding = config::as_bool(key, v)?,
            "use_transformer" => self.use_transformer = config::as_bool(key, v)?,
            "aggregator" => self.aggregator = config::as_parsed(key, v)?,
            "mil_hidden" => self.mil_hidden = config::as_usize(key, v)?,
            "schema" => self.schema = config::as_parsed(key, v)?,
            "frame_stride" => self.frame_stride = config::as_usize(key, v)?,
            "max_frames" => self.max_frames = config::as_usize(key, v)?,
            _ => return Err(config::unknown(Self::NAME, key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |f: &str, r: String| Err(ConfigError::invalid(format!("model.{f}"), r));
        if self.feature_dim == 0 {
            return bad("feature_dim", "must be positive".into());
        }
        if self.num_heads == 0 || self.feature_dim % self.num_heads != 0 {
            return bad(
                "num_heads",
                format!(
                    "feature_dim {} must be divisible by num_heads {}",
                    self.feature_dim, self.num_heads
                ),
            );
        }
        if self.use_positional_encoding && self.feature_dim % 2 != 0 {
            return bad(
                "feature_dim",
                format!("positional encoding needs an even dimension, got {}", self.feature_dim),
            );
        }
        if self.use_transformer && self.num_layers == 0 {
            return bad("num_layers", "must be at least 1 when use_transformer = true".into());
        }
        if self.ffn_hidden == 0 {
            return bad("ffn_hidden", "must be positive".into());
        }
        if self.mil_hidden == 0 {
            return bad("mil_hidden", "must be positive".into());
        }
        for (f, r) in [("dropout_encoder", self.dropout_encoder), ("dropout_head", self.dropout_head)] {
            if !(0.0..1.0).contains(&r) {
                return bad(f, format!("must lie in [0, 1), got {r}"));
            }
        }
        if self.frame_stride == 0 {
            return bad("frame_stride", "must be at least 1".into());
        }
        if self.max_frames == 0 {
            return bad("max_frames", "must be at least 1".into());
        }
        Ok(())
    }
}
