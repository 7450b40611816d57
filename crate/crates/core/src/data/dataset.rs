use std::path::Path;

use super::{load_manifest, make_folds, read_features, DataError, FeatureSequence, FeatureSource, Split, SyntheticDataset};
use crate::model::ScoreSchema;

/// One loaded video with its class index under the dataset's schema.
#[derive(Clone, Debug)]
pub struct Example {
    pub video: FeatureSequence,
    pub class: usize,
    pub split: Split,
    pub fold: Option<usize>,
}

/// Videos labeled for a single schema, held in memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: ScoreSchema,
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Rows unlabeled for `schema` are skipped.
    pub fn from_synthetic(ds: &SyntheticDataset) -> Self {
        let examples = ds
            .videos
            .iter()
            .zip(&ds.manifest)
            .map(|(v, row)| Example {
                video: v.clone(),
                class: row.class(ds.spec.schema).expect("generated rows are labeled"),
                split: row.split,
                fold: row.fold,
            })
            .collect();
        Self {
            schema: ds.spec.schema,
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.schema.num_classes()
    }

    /// Feature dimension shared by all videos (`None` when empty).
    pub fn dim(&self) -> Option<usize> {
        self.examples.first().map(|e| e.video.dim())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.examples[i].split == split).collect()
    }

    /// Largest fold id + 1 over the train split.
    pub fn num_folds(&self) -> usize {
        self.examples.iter().filter_map(|e| e.fold).max().map_or(0, |f| f + 1)
    }

    /// `(train, validation)` indices for holding out `fold`.
    pub fn fold_split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let train = self.indices(Split::Train);
        train.into_iter().partition(|&i| self.examples[i].fold != Some(fold))
    }

    /// Reassigns stratified folds `0..k` over the train split.
    pub fn refold(&mut self, k: usize, seed: u64) {
        let train = self.indices(Split::Train);
        let folds = make_folds(&self.classes(&train), k, seed);
        for (&i, f) in train.iter().zip(folds) {
            self.examples[i].fold = Some(f);
        }
    }

    pub fn classes(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.examples[i].class).collect()
    }
}

/// Loads every row labeled for `schema`, reading feature files eagerly.
pub fn load_dataset(manifest: &Path, schema: ScoreSchema) -> Result<Dataset, DataError> {
    let rows = load_manifest(manifest)?;
    let mut examples = Vec::new();
    let mut dim = None;
    for row in rows {
        let Some(class) = row.class(schema) else { continue };
        let video = read_features(&row.features_path, &row.video_id, FeatureSource::Extracted)?;
        match dim {
            None => dim = Some(video.dim()),
            Some(d) if d != video.dim() => {
                return Err(DataError::Invalid(format!(
                    "{}: feature dimension {} differs from {d}",
                    row.video_id,
                    video.dim()
                )))
            }
            _ => {}
        }
        examples.push(Example {
            video,
            class,
            split: row.split,
            fold: row.fold,
        });
    }
    Ok(Dataset { schema, examples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, write_synthetic, SyntheticTaskSpec};

    #[test]
    fn disk_round_trip_matches_memory() {
        let spec = SyntheticTaskSpec {
            num_videos: 12,
            dim: 6,
            signal_dims: vec![0, 1],
            ..SyntheticTaskSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_synthetic(dir.path(), &ds).unwrap();
        let loaded = load_dataset(&manifest, spec.schema).unwrap();
        let mem = Dataset::from_synthetic(&ds);
        assert_eq!(loaded.len(), 12);
        for (a, b) in loaded.examples.iter().zip(&mem.examples) {
            assert_eq!(a.video.features(), b.video.features());
            assert_eq!((a.class, a.split, a.fold), (b.class, b.split, b.fold));
        }
        let (tr, va) = mem.fold_split(0);
        assert_eq!(tr.len() + va.len(), mem.indices(Split::Train).len());
    }
}
