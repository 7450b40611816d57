//! Trains a small model on one fold split and prints the run report.

use severity_seq::data::{generate_synthetic, Dataset, Split, SyntheticTaskSpec, TaskKind};
use severity_seq::metrics::MetricsConfig;
use severity_seq::model::{ModelConfig, ScoreSchema};
use severity_seq::train::{train, RunSplits, TrainConfig, TrainJob};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticTaskSpec {
        task: TaskKind::OrderInvariant,
        num_videos: 80,
        dim: 32,
        signal_strength: 2.0,
        seed: 3,
        ..SyntheticTaskSpec::default()
    }
    .with_schema(ScoreSchema::Vascular);
    let data = Dataset::from_synthetic(&generate_synthetic(&spec)?);
    let (train_idx, val_idx) = data.fold_split(0);
    let cfg = TrainConfig {
        epochs: 8,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let out = train(&TrainJob {
        model: &ModelConfig::small(32, ScoreSchema::Vascular),
        train: &cfg,
        metrics: &MetricsConfig::default(),
        data: &data,
        splits: RunSplits {
            train: train_idx,
            validation: val_idx,
            test: data.indices(Split::Test),
        },
        checkpoint: None,
        label: "example".into(),
    })?;
    print!("{}", out.record.report());
    Ok(())
}
