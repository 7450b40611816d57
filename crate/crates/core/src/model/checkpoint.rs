//! Versioned checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `SQCK` |
//! | 2 | format version (u16, currently 1) |
//! | 1 | storage precision (0 = f32, 1 = f64) |
//! | 1 | reserved, zero |
//! | 4 | header length H (u32) |
//! | H | UTF-8 header: `[checkpoint]` metadata and the `[model]` config echo |
//! | … | per tensor: name length (u16), name, rank (u8), extents (u32 each), values |
//! | 4 | CRC32 of every preceding byte |

use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::config::{self, ConfigError, Section};
use crate::rng::RNG_ALGORITHM;
use crate::tensor::{Precision, Tensor};

use super::params::ParamStore;
use super::{Model, ModelConfig, ModelError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SQCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("unsupported checkpoint version {0}")]
    Version(u16),
    #[error("checkpoint header: {0}")]
    Header(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Provenance stored alongside the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub rng_algorithm: String,
    pub seed: u64,
    pub precision: Precision,
}

impl CheckpointMeta {
    pub fn new(seed: u64, precision: Precision) -> Self {
        Self {
            rng_algorithm: RNG_ALGORITHM.to_string(),
            seed,
            precision,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub model: Model,
}

fn header_text(model: &Model, meta: &CheckpointMeta) -> String {
    format!(
        "[checkpoint]\nrng_algorithm = {}\nseed = {}\nprecision = {}\ntensors = {}\n\n{}",
        config::string(&meta.rng_algorithm),
        meta.seed,
        config::string(meta.precision),
        model.params().len(),
        model.config().to_section_string()
    )
}

pub fn encode_checkpoint(model: &Model, meta: &CheckpointMeta) -> Vec<u8> {
    let header = header_text(model, meta);
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(match meta.precision {
        Precision::F32 => 0,
        Precision::F64 => 1,
    });
    out.push(0);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (name, t) in model.params().iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match meta.precision {
            Precision::F32 => t.data().iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            Precision::F64 => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Corrupt {
                offset: self.pos,
                reason: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 16 {
        return Err(CheckpointError::Corrupt {
            offset: bytes.len(),
            reason: "file too short".into(),
        });
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_len]) != stored {
        return Err(CheckpointError::Corrupt {
            offset: body_len,
            reason: "CRC32 mismatch".into(),
        });
    }
    let mut c = Cursor {
        bytes: &bytes[..body_len],
        pos: 0,
    };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Corrupt {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = c.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let precision = match c.u8("precision")? {
        0 => Precision::F32,
        1 => Precision::F64,
        other => {
            return Err(CheckpointError::Corrupt {
                offset: 6,
                reason: format!("unknown precision tag {other}"),
            })
        }
    };
    c.u8("reserved")?;
    let hlen = c.u32("header length")? as usize;
    let header_offset = c.pos;
    let header = std::str::from_utf8(c.take(hlen, "header")?).map_err(|e| CheckpointError::Corrupt {
        offset: header_offset,
        reason: e.to_string(),
    })?;
    let table: toml::Table = header
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let meta_t = table
        .get("checkpoint")
        .and_then(|v| v.as_table())
        .ok_or_else(|| ConfigError::Syntax("missing [checkpoint] section".into()))?;
    let field = |k: &str| meta_t.get(k).ok_or_else(|| ConfigError::invalid(format!("checkpoint.{k}"), "missing"));
    let meta = CheckpointMeta {
        rng_algorithm: config::as_str("rng_algorithm", field("rng_algorithm")?)?.to_string(),
        seed: config::as_u64("seed", field("seed")?)?,
        precision,
    };
    let count = config::as_usize("tensors", field("tensors")?)?;
    let mut model_cfg = ModelConfig::default();
    let model_t = table
        .get(ModelConfig::NAME)
        .and_then(|v| v.as_table())
        .ok_or_else(|| ConfigError::Syntax("missing [model] section".into()))?;
    model_cfg.apply_table(model_t)?;

    let mut store = ParamStore::default();
    for _ in 0..count {
        let name_len = c.u16("tensor name length")? as usize;
        let name_offset = c.pos;
        let name = std::str::from_utf8(c.take(name_len, "tensor name")?)
            .map_err(|e| CheckpointError::Corrupt {
                offset: name_offset,
                reason: e.to_string(),
            })?
            .to_string();
        let rank = c.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("extent")? as usize);
        }
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match precision {
            Precision::F32 => c
                .take(n * 4, "tensor data")?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect(),
            Precision::F64 => c
                .take(n * 8, "tensor data")?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        };
        let offset = c.pos;
        let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt {
            offset,
            reason: e.to_string(),
        })?;
        store.push(name, t);
    }
    if c.pos != body_len {
        return Err(CheckpointError::Corrupt {
            offset: c.pos,
            reason: format!("{} trailing bytes", body_len - c.pos),
        });
    }
    let model = Model::from_params(model_cfg, store)?;
    Ok(Checkpoint { meta, model })
}

pub fn save_checkpoint(path: &Path, model: &Model, meta: &CheckpointMeta) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = encode_checkpoint(model, meta);
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregator, ScoreSchema};

    fn model() -> Model {
        let mut cfg = ModelConfig::small(8, ScoreSchema::Vascular);
        cfg.num_heads = 2;
        cfg.aggregator = Aggregator::AttentionMil;
        Model::init(cfg, 3).unwrap()
    }

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let m = model();
        let meta = CheckpointMeta::new(3, Precision::F64);
        let back = decode_checkpoint(&encode_checkpoint(&m, &meta)).unwrap();
        assert_eq!(back.meta, meta);
        assert_eq!(back.model.config(), m.config());
        assert_eq!(back.model.params(), m.params());
    }

    #[test]
    fn f32_round_trip_of_rounded_params() {
        let mut m = model();
        m.params_mut().tensors_mut().iter_mut().for_each(Tensor::round_to_f32);
        let meta = CheckpointMeta::new(3, Precision::F32);
        let bytes = encode_checkpoint(&m, &meta);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.model.params(), m.params());
        assert_eq!(encode_checkpoint(&back.model, &back.meta), bytes);
    }

    #[test]
    fn corruption_detected() {
        let m = model();
        let mut bytes = encode_checkpoint(&m, &CheckpointMeta::new(3, Precision::F64));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::Corrupt { .. })));
        let bytes = encode_checkpoint(&m, &CheckpointMeta::new(3, Precision::F64));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 9]).is_err());
    }
}
