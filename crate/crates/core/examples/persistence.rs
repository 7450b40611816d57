//! AFF1 feature files and checkpoints: bit-exact round trips and corruption detection.

use severity_seq::data::{decode_aff1, encode_aff1};
use severity_seq::model::{decode_checkpoint, encode_checkpoint, CheckpointMeta, Model, ModelConfig, ScoreSchema};
use severity_seq::tensor::{Precision, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let features = Tensor::matrix(3, 4, (0..12).map(|i| i as f64 * 0.25).collect())?;
    let mut bytes = encode_aff1(&features)?;
    assert_eq!(decode_aff1(&bytes)?, features);
    println!("AFF1: {} bytes for a 3x4 matrix", bytes.len());
    bytes[20] ^= 1;
    println!("corrupted AFF1: {}", decode_aff1(&bytes).unwrap_err());

    let model = Model::init(ModelConfig::small(16, ScoreSchema::Bleeding), 2)?;
    let ckpt = encode_checkpoint(&model, &CheckpointMeta::new(2, Precision::F64));
    let back = decode_checkpoint(&ckpt)?;
    assert_eq!(back.model.params().tensors(), model.params().tensors());
    println!("checkpoint: {} bytes, {} parameters, seed {}", ckpt.len(), back.model.num_parameters(), back.meta.seed);
    Ok(())
}
