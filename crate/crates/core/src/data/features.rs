//! Frame-feature sequences and the AFF1 binary format.
//!
//! AFF1 layout (little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `AFF1` |
//! | 4 | 2 | format version (u16, currently 1) |
//! | 6 | 2 | reserved, zero |
//! | 8 | 4 | D, feature dimension (u32) |
//! | 12 | 4 | N, frame count (u32) |
//! | 16 | 4·N·D | IEEE-754 f32 values, row-major (frame by frame) |
//! | 16+4·N·D | 4 | CRC32 of the value bytes |
//!
//! Video ids and labels live in the manifest, not in the binary.

use std::fmt;
use std::path::Path;

use super::DataError;
use crate::tensor::Tensor;

pub const AFF1_MAGIC: &[u8; 4] = b"AFF1";
pub const AFF1_VERSION: u16 = 1;
pub const AFF1_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSource {
    Extracted,
    Synthetic,
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSource::Extracted => "extracted",
            FeatureSource::Synthetic => "synthetic",
        })
    }
}

/// One video as an `N × D` matrix of frame features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    video_id: String,
    features: Tensor,
    source: FeatureSource,
}

impl FeatureSequence {
    pub fn new(video_id: impl Into<String>, features: Tensor, source: FeatureSource) -> Result<Self, DataError> {
        let video_id = video_id.into();
        let (n, d) = features
            .dims2("features")
            .map_err(|e| DataError::Invalid(format!("{video_id}: {e}")))?;
        if n == 0 || d == 0 {
            return Err(DataError::Invalid(format!("{video_id}: empty feature matrix")));
        }
        if !features.all_finite() {
            return Err(DataError::Invalid(format!("{video_id}: non-finite feature values")));
        }
        Ok(Self {
            video_id,
            features,
            source,
        })
    }

    pub fn synthetic(video_id: impl Into<String>, features: Tensor) -> Result<Self, DataError> {
        Self::new(video_id, features, FeatureSource::Synthetic)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn num_frames(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    /// Copy with frames reordered as `order[i]` → position `i`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let rows: Vec<&[f64]> = order.iter().map(|&i| self.features.row(i)).collect();
        Self {
            video_id: self.video_id.clone(),
            features: Tensor::from_rows(&rows).expect("same row length"),
            source: self.source,
        }
    }
}

/// Serializes an `N × D` matrix as AFF1. Values are stored as `f32`.
pub fn encode_aff1(features: &Tensor) -> Result<Vec<u8>, DataError> {
    let (n, d) = features.dims2("aff1").map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(AFF1_HEADER_LEN + 4 * n * d + 4);
    out.extend_from_slice(AFF1_MAGIC);
    out.extend_from_slice(&AFF1_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for v in features.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out[AFF1_HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn corrupt(offset: usize, reason: impl Into<String>) -> DataError {
    DataError::Corrupt {
        offset,
        reason: reason.into(),
    }
}

pub fn decode_aff1(bytes: &[u8]) -> Result<Tensor, DataError> {
    if bytes.len() < AFF1_HEADER_LEN {
        return Err(corrupt(bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != AFF1_MAGIC {
        return Err(corrupt(0, "bad magic (expected AFF1)"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != AFF1_VERSION {
        return Err(corrupt(4, format!("unsupported version {version}")));
    }
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if n == 0 || d == 0 {
        return Err(corrupt(8, format!("empty matrix N={n} D={d}")));
    }
    let payload_len = 4 * n * d;
    let expected = AFF1_HEADER_LEN + payload_len + 4;
    if bytes.len() != expected {
        return Err(corrupt(
            bytes.len().min(expected),
            format!("length {} does not match header (expected {expected} bytes for N={n}, D={d})", bytes.len()),
        ));
    }
    let payload = &bytes[AFF1_HEADER_LEN..AFF1_HEADER_LEN + payload_len];
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(corrupt(expected - 4, "CRC32 mismatch"));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(corrupt(AFF1_HEADER_LEN + 4 * i, "non-finite value"));
    }
    Tensor::matrix(n, d, data).map_err(|e| corrupt(AFF1_HEADER_LEN, e.to_string()))
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<(), DataError> {
    let bytes = encode_aff1(seq.features())?;
    std::fs::write(path, bytes).map_err(|e| DataError::io(path, e))
}

/// Reads an AFF1 file. `video_id` comes from the manifest.
pub fn read_features(path: &Path, video_id: &str, source: FeatureSource) -> Result<FeatureSequence, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    let t = decode_aff1(&bytes).map_err(|e| match e {
        DataError::Corrupt { offset, reason } => DataError::Corrupt {
            offset,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })?;
    FeatureSequence::new(video_id, t, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Tensor {
        Tensor::matrix(5, 8, (0..40).map(|i| (i as f32 * 0.37 - 3.0) as f64).collect()).unwrap()
    }

    #[test]
    fn round_trip_bytes() {
        let t = sample();
        let bytes = encode_aff1(&t).unwrap();
        let back = decode_aff1(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(encode_aff1(&back).unwrap(), bytes);
    }

    #[test]
    fn minimal_file_size() {
        let t = Tensor::zeros(&[1, 768]);
        assert_eq!(encode_aff1(&t).unwrap().len(), 16 + 3072 + 4);
    }

    #[test]
    fn truncated_or_flipped_rejected() {
        let bytes = encode_aff1(&sample()).unwrap();
        assert!(matches!(decode_aff1(&bytes[..bytes.len() - 5]), Err(DataError::Corrupt { .. })));
        let mut flipped = bytes.clone();
        flipped[20] ^= 1;
        match decode_aff1(&flipped) {
            Err(DataError::Corrupt { reason, .. }) => assert!(reason.contains("CRC")),
            other => panic!("{other:?}"),
        }
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_aff1(&magic), Err(DataError::Corrupt { offset: 0, .. })));
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(decode_aff1(&version), Err(DataError::Corrupt { offset: 4, .. })));
    }

    proptest! {
        #[test]
        fn f32_values_round_trip(n in 1usize..6, d in 1usize..9, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n * d).map(|_| rng.random::<f32>() as f64 * 100.0 - 50.0).map(|v| v as f32 as f64).collect();
            let t = Tensor::matrix(n, d, data).unwrap();
            prop_assert_eq!(decode_aff1(&encode_aff1(&t).unwrap()).unwrap(), t);
        }
    }
}
