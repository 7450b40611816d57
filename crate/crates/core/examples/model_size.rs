//! Parameter counts of the default and small configurations, and one forward pass.

use severity_seq::data::FeatureSequence;
use severity_seq::model::{Model, ModelConfig, ScoreSchema};
use severity_seq::tensor::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = Model::init(ModelConfig::default(), 0)?;
    println!("default: {} parameters", full.num_parameters());
    let small = Model::init(ModelConfig::small(64, ScoreSchema::Mes), 0)?;
    println!("small(64): {} parameters", small.num_parameters());

    let video = FeatureSequence::synthetic("demo", Tensor::zeros(&[20, 768]))?;
    let pred = full.predict_video(&video)?;
    println!("logits {:?}", pred.logits);
    Ok(())
}
