//! Trains the full model and the mean-pooling baseline, writes both prediction
//! files and compares them against manifest labels.

use severity_seq::cli::compare::compare_predictions;
use severity_seq::cli::predictions::Predictions;
use severity_seq::data::{generate_synthetic, load_dataset, read_manifest, write_synthetic, Split, SyntheticTaskSpec, TaskKind};
use severity_seq::metrics::MetricsConfig;
use severity_seq::model::{ModelConfig, ScoreSchema};
use severity_seq::train::{score_videos, train, AblationId, RunSplits, TrainConfig, TrainJob};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = SyntheticTaskSpec {
        task: TaskKind::OrderDependent,
        num_videos: 160,
        dim: 16,
        signal_dims: (0..4).collect(),
        signal_strength: 4.0,
        test_fraction: 0.25,
        ..SyntheticTaskSpec::default()
    }
    .with_schema(ScoreSchema::Vascular);
    let manifest = write_synthetic(dir.path(), &generate_synthetic(&spec)?)?;
    let data = load_dataset(&manifest, spec.schema)?;
    let test_rows: Vec<_> = read_manifest(&manifest)?.into_iter().filter(|r| r.split == Split::Test).collect();

    let mut files = Vec::new();
    for id in [AblationId::TransformerAttnMil, AblationId::AvgPool] {
        let out = train(&TrainJob {
            model: &ModelConfig::small(16, spec.schema),
            train: &TrainConfig {
                epochs: 30,
                learning_rate: 3e-3,
                ablation: Some(id),
                ..TrainConfig::default()
            },
            metrics: &MetricsConfig::default(),
            data: &data,
            splits: RunSplits {
                train: data.indices(Split::Train),
                ..RunSplits::default()
            },
            checkpoint: None,
            label: id.name().into(),
        })?;
        let preds = Predictions::from_scored(spec.schema, &score_videos(&out.model, &test_rows).scored);
        let path = dir.path().join(format!("{}.csv", id.name()));
        std::fs::write(&path, preds.to_csv())?;
        files.push(Predictions::read(&path)?);
    }
    let report = compare_predictions(&files[0], &files[1], &test_rows, &MetricsConfig::default())?;
    println!("a = transformer_attn_mil, b = avg_pool");
    print!("{}", report.to_text());
    Ok(())
}
