//! Four-fold cross-validation of the full model.

use severity_seq::data::{generate_synthetic, Dataset, SyntheticTaskSpec, TaskKind};
use severity_seq::metrics::MetricsConfig;
use severity_seq::model::{ModelConfig, ScoreSchema};
use severity_seq::train::{cross_validate, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticTaskSpec {
        task: TaskKind::OrderDependent,
        num_videos: 80,
        dim: 32,
        signal_strength: 3.0,
        test_fraction: 0.0,
        seed: 5,
        ..SyntheticTaskSpec::default()
    }
    .with_schema(ScoreSchema::Vascular);
    let data = Dataset::from_synthetic(&generate_synthetic(&spec)?);
    let cfg = TrainConfig {
        epochs: 6,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let cv = cross_validate(&ModelConfig::small(32, ScoreSchema::Vascular), &cfg, &MetricsConfig::default(), &data, 4, None)?;
    print!("{}", cv.summary());
    Ok(())
}
