use std::fmt;
use std::str::FromStr;

use crate::config::{self, ConfigError, Section};
use crate::model::{Aggregator, ModelConfig};
use crate::tensor::Precision;

/// The four pooling/encoder combinations compared in the ablation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AblationId {
    AvgPool,
    TransformerOnly,
    AttnMilOnly,
    TransformerAttnMil,
}

impl AblationId {
    /// Fixed report order.
    pub const ALL: [AblationId; 4] = [
        AblationId::AvgPool,
        AblationId::TransformerOnly,
        AblationId::AttnMilOnly,
        AblationId::TransformerAttnMil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationId::AvgPool => "avg_pool",
            AblationId::TransformerOnly => "transformer_only",
            AblationId::AttnMilOnly => "attn_mil_only",
            AblationId::TransformerAttnMil => "transformer_attn_mil",
        }
    }

    /// `(use_positional_encoding, use_transformer, aggregator)`.
    pub fn flags(self) -> (bool, bool, Aggregator) {
        match self {
            AblationId::AvgPool => (false, false, Aggregator::Average),
            AblationId::TransformerOnly => (true, true, Aggregator::Average),
            AblationId::AttnMilOnly => (false, false, Aggregator::AttentionMil),
            AblationId::TransformerAttnMil => (true, true, Aggregator::AttentionMil),
        }
    }

    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let (pe, t, agg) = self.flags();
        ModelConfig {
            use_positional_encoding: pe,
            use_transformer: t,
            aggregator: agg,
            ..base.clone()
        }
    }
}

impl fmt::Display for AblationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            format!("unknown ablation `{s}` (expected avg_pool, transformer_only, attn_mil_only or transformer_attn_mil)")
        })
    }
}

/// Which parameters a run retains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Selection {
    /// Best validation weighted F1; ties go to the earlier epoch.
    #[default]
    BestValidation,
    LastEpoch,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::BestValidation => "best_validation",
            Selection::LastEpoch => "last_epoch",
        })
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best_validation" => Ok(Selection::BestValidation),
            "last_epoch" => Ok(Selection::LastEpoch),
            other => Err(format!("unknown selection `{other}` (expected best_validation or last_epoch)")),
        }
    }
}

/// `[train]` config section.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Videos per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Epochs between validation passes; the last epoch is always validated.
    pub eval_every: usize,
    /// Overrides the model's PE/transformer/aggregator switches when set.
    pub ablation: Option<AblationId>,
    pub selection: Selection,
    /// Scale the loss by inverse class frequency (off: imbalance is handled by sampling).
    pub class_weighted_loss: bool,
    /// Fold held out for validation by single-run training.
    pub validation_fold: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            batch_size: 8,
            seed: 0,
            precision: Precision::F64,
            eval_every: 1,
            ablation: None,
            selection: Selection::BestValidation,
            class_weighted_loss: false,
            validation_fold: 0,
        }
    }
}

impl TrainConfig {
    /// The model configuration this run actually trains.
    pub fn effective_model(&self, base: &ModelConfig) -> ModelConfig {
        match self.ablation {
            Some(a) => a.apply(base),
            None => base.clone(),
        }
    }
}

impl Section for TrainConfig {
    const NAME: &'static str = "train";

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("learning_rate", config::float(self.learning_rate)),
            ("weight_decay", config::float(self.weight_decay)),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("precision", config::string(self.precision)),
            ("eval_every", self.eval_every.to_string()),
            (
                "ablation",
                config::string(self.ablation.map_or("none", AblationId::name)),
            ),
            ("selection", config::string(self.selection)),
            ("class_weighted_loss", self.class_weighted_loss.to_string()),
            ("validation_fold", self.validation_fold.to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        match key {
            "epochs" => self.epochs = config::as_usize(key, v)?,
            "learning_rate" => self.learning_rate = config::as_f64(key, v)?,
            "weight_decay" => self.weight_decay = config::as_f64(key, v)?,
            "batch_size" => self.batch_size = config::as_usize(key, v)?,
            "seed" => self.seed = config::as_u64(key, v)?,
            "precision" => self.precision = config::as_parsed(key, v)?,
            "eval_every" => self.eval_every = config::as_usize(key, v)?,
            "ablation" => {
                self.ablation = match config::as_str(key, v)? {
                    "none" => None,
                    s => Some(s.parse().map_err(|e: String| ConfigError::invalid(key, e))?),
                }
            }
            "selection" => self.selection = config::as_parsed(key, v)?,
            "class_weighted_loss" => self.class_weighted_loss = config::as_bool(key, v)?,
            "validation_fold" => self.validation_fold = config::as_usize(key, v)?,
            _ => return Err(config::unknown(Self::NAME, key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.epochs == 0 {
            return Err(ConfigError::invalid("train.epochs", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(ConfigError::invalid("train.learning_rate", "must be finite and non-negative"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(ConfigError::invalid("train.weight_decay", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::invalid("train.batch_size", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(ConfigError::invalid("train.eval_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_mapping_is_a_bijection() {
        let base = ModelConfig::default();
        let configs: Vec<ModelConfig> = AblationId::ALL.iter().map(|a| a.apply(&base)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(configs[i], configs[j]);
            }
            let mut c = configs[i].clone();
            c.use_positional_encoding = base.use_positional_encoding;
            c.use_transformer = base.use_transformer;
            c.aggregator = base.aggregator;
            assert_eq!(c, base);
        }
        assert_eq!(configs[0].aggregator, Aggregator::Average);
        assert!(!configs[0].use_transformer && !configs[0].use_positional_encoding);
    }

    #[test]
    fn names_round_trip() {
        for a in AblationId::ALL {
            assert_eq!(a.name().parse::<AblationId>().unwrap(), a);
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().field().as_deref(), Some("train.epochs"));
    }
}
