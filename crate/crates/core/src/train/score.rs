use std::path::Path;

use rayon::prelude::*;

use super::TrainError;
use crate::data::{read_features, read_manifest, FeatureSource, LabeledVideo};
use crate::model::{load_checkpoint, Model, Prediction};

/// One successfully scored video.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredVideo {
    pub video_id: String,
    /// Label under the model's schema, when the manifest has one.
    pub truth: Option<u8>,
    pub prediction: Prediction,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreOutput {
    /// Sorted by video id.
    pub scored: Vec<ScoredVideo>,
    /// `(video_id, reason)`, sorted by video id.
    pub failures: Vec<(String, String)>,
}

/// Eval-mode inference over manifest rows. Per-video failures (missing or
/// corrupt features, dimension mismatch) are collected, not fatal.
pub fn score_videos(model: &Model, rows: &[LabeledVideo]) -> ScoreOutput {
    let schema = model.config().schema;
    let results: Vec<Result<ScoredVideo, (String, String)>> = rows
        .par_iter()
        .map(|row| {
            let fail = |e: String| (row.video_id.clone(), e);
            let video = read_features(&row.features_path, &row.video_id, FeatureSource::Extracted)
                .map_err(|e| fail(e.to_string()))?;
            let prediction = model.predict_video(&video).map_err(|e| fail(e.to_string()))?;
            Ok(ScoredVideo {
                video_id: row.video_id.clone(),
                truth: row.label(schema),
                prediction,
            })
        })
        .collect();
    let mut out = ScoreOutput::default();
    for r in results {
        match r {
            Ok(s) => out.scored.push(s),
            Err(f) => out.failures.push(f),
        }
    }
    out.scored.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    out.failures.sort();
    out
}

/// Loads a checkpoint and a manifest, then scores every row.
pub fn score_checkpoint(checkpoint: &Path, manifest: &Path) -> Result<(Model, ScoreOutput), TrainError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let rows = read_manifest(manifest)?;
    let out = score_videos(&ckpt.model, &rows);
    Ok((ckpt.model, out))
}
