//! Run configuration files.
//!
//! A run configuration is a flat key-value document with four sections:
//! `[model]`, `[train]`, `[data]` and `[metrics]`. Every field of the
//! corresponding structs is addressable and unknown keys are rejected.
//! [`RunConfig::to_canonical_string`] echoes a normalized form that parses
//! back to the same value.
//!
//! ```text
//! [model]
//! feature_dim = 64
//! aggregator = "attention_mil"
//!
//! [train]
//! epochs = 15
//! learning_rate = 0.0001
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::data::SyntheticTaskSpec;
use crate::metrics::MetricsConfig;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// The offending field, when the error concerns one.
    pub fn field(&self) -> Option<String> {
        match self {
            ConfigError::UnknownKey { section, key } => Some(format!("{section}.{key}")),
            ConfigError::Invalid { field, .. } => Some(field.clone()),
            _ => None,
        }
    }
}

/// One addressable section of a run configuration.
pub trait Section {
    const NAME: &'static str;

    /// `(key, TOML literal)` pairs in canonical order.
    fn entries(&self) -> Vec<(&'static str, String)>;

    fn set(&mut self, key: &str, value: &toml::Value) -> Result<(), ConfigError>;

    fn validate(&self) -> Result<(), ConfigError>;

    fn to_section_string(&self) -> String {
        let mut out = format!("[{}]\n", Self::NAME);
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies every key of a parsed table, rejecting unknown keys.
    fn apply_table(&mut self, table: &toml::Table) -> Result<(), ConfigError> {
        for (key, value) in table {
            self.set(key, value).map_err(|e| match e {
                ConfigError::Invalid { field, reason } if !field.contains('.') => ConfigError::Invalid {
                    field: format!("{}.{field}", Self::NAME),
                    reason,
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

pub(crate) fn unknown(section: &str, key: &str) -> ConfigError {
    ConfigError::UnknownKey {
        section: section.into(),
        key: key.into(),
    }
}

pub(crate) fn as_usize(key: &str, v: &toml::Value) -> Result<usize, ConfigError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(ConfigError::invalid(key, format!("expected a non-negative integer, got {v}"))),
    }
}

pub(crate) fn as_u64(key: &str, v: &toml::Value) -> Result<u64, ConfigError> {
    as_usize(key, v).map(|x| x as u64)
}

pub(crate) fn as_f64(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::invalid(key, format!("expected a number, got {v}"))),
    }
}

pub(crate) fn as_bool(key: &str, v: &toml::Value) -> Result<bool, ConfigError> {
    v.as_bool()
        .ok_or_else(|| ConfigError::invalid(key, format!("expected true or false, got {v}")))
}

pub(crate) fn as_str<'v>(key: &str, v: &'v toml::Value) -> Result<&'v str, ConfigError> {
    v.as_str()
        .ok_or_else(|| ConfigError::invalid(key, format!("expected a string, got {v}")))
}

pub(crate) fn as_parsed<T: std::str::FromStr>(key: &str, v: &toml::Value) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    as_str(key, v)?.parse().map_err(|e: T::Err| ConfigError::invalid(key, e.to_string()))
}

pub(crate) fn as_usize_list(key: &str, v: &toml::Value) -> Result<Vec<usize>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ConfigError::invalid(key, format!("expected an array, got {v}")))?;
    arr.iter().map(|x| as_usize(key, x)).collect()
}

pub(crate) fn as_f64_list(key: &str, v: &toml::Value) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ConfigError::invalid(key, format!("expected an array, got {v}")))?;
    arr.iter().map(|x| as_f64(key, x)).collect()
}

/// Canonical float literal (shortest round-trip representation).
pub(crate) fn float(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn string(v: impl std::fmt::Display) -> String {
    format!("\"{v}\"")
}

pub(crate) fn list<T: std::fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) fn float_list(items: &[f64]) -> String {
    let parts: Vec<String> = items.iter().map(|&x| float(x)).collect();
    format!("[{}]", parts.join(", "))
}

/// The full operator configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: SyntheticTaskSpec,
    pub metrics: MetricsConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = RunConfig::default();
        for (name, value) in &table {
            let section = value
                .as_table()
                .ok_or_else(|| ConfigError::Syntax(format!("top-level key `{name}` must be a section")))?;
            match name.as_str() {
                ModelConfig::NAME => cfg.model.apply_table(section)?,
                TrainConfig::NAME => cfg.train.apply_table(section)?,
                SyntheticTaskSpec::NAME => cfg.data.apply_table(section)?,
                MetricsConfig::NAME => cfg.metrics.apply_table(section)?,
                other => return Err(ConfigError::UnknownSection(other.to_string())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.train.validate()?;
        self.data.validate()?;
        self.metrics.validate()
    }

    pub fn to_canonical_string(&self) -> String {
        [
            self.model.to_section_string(),
            self.train.to_section_string(),
            self.data.to_section_string(),
            self.metrics.to_section_string(),
        ]
        .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_canonical_string();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::parse("[model]\nfeature_dim = 64\nnum_heads = 4\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.model.feature_dim, 64);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.learning_rate, 1e-4);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("[model]\nfeature_dims = 64\n").unwrap_err();
        assert_eq!(err.field().as_deref(), Some("model.feature_dims"));
        assert!(matches!(RunConfig::parse("[optimizer]\nx = 1\n"), Err(ConfigError::UnknownSection(_))));
    }

    #[test]
    fn invalid_value_names_field() {
        let err = RunConfig::parse("[model]\nfeature_dim = 10\nnum_heads = 4\n").unwrap_err();
        assert!(err.to_string().contains("num_heads") || err.to_string().contains("feature_dim"), "{err}");
        let err = RunConfig::parse("[train]\nepochs = \"x\"\n").unwrap_err();
        assert_eq!(err.field().as_deref(), Some("train.epochs"));
    }
}
