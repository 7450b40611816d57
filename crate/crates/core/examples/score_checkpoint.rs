//! Saves a checkpoint, then scores a manifest from disk, collecting per-video failures.

use severity_seq::data::{generate_synthetic, write_synthetic, SyntheticTaskSpec};
use severity_seq::model::{save_checkpoint, CheckpointMeta, Model, ModelConfig};
use severity_seq::tensor::Precision;
use severity_seq::train::score_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = SyntheticTaskSpec {
        num_videos: 12,
        dim: 16,
        ..SyntheticTaskSpec::default()
    };
    let manifest = write_synthetic(dir.path(), &generate_synthetic(&spec)?)?;
    // One video goes missing.
    let gone = std::fs::read_dir(dir.path().join("features"))?.next().unwrap()?.path();
    std::fs::remove_file(&gone)?;

    let ckpt = dir.path().join("model.ckpt");
    let model = Model::init(ModelConfig::small(16, spec.schema), 4)?;
    save_checkpoint(&ckpt, &model, &CheckpointMeta::new(4, Precision::F64))?;

    let (_, out) = score_checkpoint(&ckpt, &manifest)?;
    for s in &out.scored {
        println!("{}: truth {:?} predicted {}", s.video_id, s.truth, s.prediction.trace.predicted_score);
    }
    for (id, why) in &out.failures {
        println!("{id}: FAILED {why}");
    }
    Ok(())
}
