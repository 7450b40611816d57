//! Trains briefly, then renders one video's attention weights as a trace file and an SVG heat strip.
//!
//! `cargo run --example attention_trace -- [out_dir]`

use severity_seq::cli::trace::{format_trace, render_heat_strip};
use severity_seq::data::{generate_synthetic, Dataset, SyntheticTaskSpec};
use severity_seq::metrics::MetricsConfig;
use severity_seq::model::{ModelConfig, ScoreSchema};
use severity_seq::train::{train, AblationId, RunSplits, TrainConfig, TrainJob};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticTaskSpec {
        num_videos: 60,
        dim: 16,
        signal_dims: (0..4).collect(),
        signal_strength: 4.0,
        test_fraction: 0.0,
        ..SyntheticTaskSpec::default()
    }
    .with_schema(ScoreSchema::Vascular);
    let data = Dataset::from_synthetic(&generate_synthetic(&spec)?);
    let out = train(&TrainJob {
        model: &ModelConfig::small(16, ScoreSchema::Vascular),
        train: &TrainConfig {
            epochs: 15,
            learning_rate: 3e-3,
            ablation: Some(AblationId::AttnMilOnly),
            ..TrainConfig::default()
        },
        metrics: &MetricsConfig::default(),
        data: &data,
        splits: RunSplits {
            train: (0..data.len()).collect(),
            ..RunSplits::default()
        },
        checkpoint: None,
        label: "trace".into(),
    })?;

    // A highest-class video carries its signal in a subset of frames.
    let ex = data.examples.iter().find(|e| e.class == 2).expect("class present");
    let pred = out.model.predict_video(&ex.video)?;
    print!("{}", format_trace(&pred.trace));

    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map_or_else(|| tmp.path().to_path_buf(), Into::into);
    std::fs::create_dir_all(&dir)?;
    let svg = dir.join("trace.svg");
    std::fs::write(&svg, render_heat_strip(&pred.trace))?;
    println!("heat strip: {}", svg.display());
    Ok(())
}
