//! Cross-validates the four architecture variants on the order-dependent task.
//!
//! Short schedule; see the acceptance suite for a longer one.

use severity_seq::data::{generate_synthetic, Dataset, SyntheticTaskSpec, TaskKind};
use severity_seq::metrics::MetricsConfig;
use severity_seq::model::{ModelConfig, ScoreSchema};
use severity_seq::train::{run_ablation, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticTaskSpec {
        task: TaskKind::OrderDependent,
        num_videos: 80,
        dim: 32,
        signal_strength: 4.0,
        test_fraction: 0.0,
        seed: 7,
        ..SyntheticTaskSpec::default()
    }
    .with_schema(ScoreSchema::Vascular);
    let data = Dataset::from_synthetic(&generate_synthetic(&spec)?);
    let cfg = TrainConfig {
        epochs: 6,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let table = run_ablation(&ModelConfig::small(32, ScoreSchema::Vascular), &cfg, &MetricsConfig::default(), &data, 4, None)?;
    print!("{}", table.report());
    Ok(())
}
