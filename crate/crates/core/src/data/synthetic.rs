//! Synthetic severity tasks with planted frame-level signals.
//!
//! * `order_invariant`: a video of class `c` carries a mean shift of
//!   `c · signal_strength` on `signal_dims` in a random 10–30% of its frames.
//!   Any bag-level pooling that can find those frames solves it.
//! * `order_dependent`: every video, whatever its class, contains the same
//!   frames: one block of `m` "A" frames (shift on the first half of
//!   `signal_dims`) and one block of `m` "B" frames (shift on the second
//!   half), `m = max(1, round(0.15·N))`. Only their temporal arrangement
//!   encodes the class:
//!
//!   | class | arrangement |
//!   |---|---|
//!   | 0 | A block in the first half, B block in the second half |
//!   | 1 | B block in the first half, A block in the second half |
//!   | 2 | A and B frames interleaved (ABAB…) in a window centred mid-video |
//!   | 3 | A/2 · B · A/2 sandwich centred mid-video |
//!
//!   A permutation-invariant aggregator therefore sees identically
//!   distributed bags for every class.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{make_folds, write_features, write_manifest, DataError, FeatureSequence, LabeledVideo, Split};
use crate::config::{self, ConfigError, Section};
use crate::model::ScoreSchema;
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TaskKind {
    #[default]
    OrderInvariant,
    OrderDependent,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::OrderInvariant => "order_invariant",
            TaskKind::OrderDependent => "order_dependent",
        })
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "order_invariant" => Ok(TaskKind::OrderInvariant),
            "order_dependent" => Ok(TaskKind::OrderDependent),
            other => Err(format!(
                "unknown task `{other}` (expected order_invariant or order_dependent)"
            )),
        }
    }
}

/// Parameters of a synthetic dataset. Also the `[data]` config section.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTaskSpec {
    pub task: TaskKind,
    pub num_videos: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub dim: usize,
    pub signal_dims: Vec<usize>,
    pub signal_strength: f64,
    pub noise_scale: f64,
    /// Per-class probabilities; its length is the class count.
    pub class_distribution: Vec<f64>,
    pub seed: u64,
    /// Schema the labels are written under. Must have as many classes as
    /// `class_distribution`.
    pub schema: ScoreSchema,
    /// Fraction of each class held out as the test split.
    pub test_fraction: f64,
    pub num_folds: usize,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            task: TaskKind::OrderInvariant,
            num_videos: 120,
            frames_min: 16,
            frames_max: 48,
            dim: 64,
            signal_dims: (0..8).collect(),
            signal_strength: 1.0,
            noise_scale: 1.0,
            class_distribution: vec![0.25; 4],
            seed: 0,
            schema: ScoreSchema::Mes,
            test_fraction: 0.2,
            num_folds: 4,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn num_classes(&self) -> usize {
        self.class_distribution.len()
    }

    /// Uniform class distribution over `schema`.
    pub fn with_schema(mut self, schema: ScoreSchema) -> Self {
        let c = schema.num_classes();
        self.schema = schema;
        self.class_distribution = vec![1.0 / c as f64; c];
        self
    }
}

impl Section for SyntheticTaskSpec {
    const NAME: &'static str = "data";

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", config::string(self.task)),
            ("num_videos", self.num_videos.to_string()),
            ("frames_min", self.frames_min.to_string()),
            ("frames_max", self.frames_max.to_string()),
            ("dim", self.dim.to_string()),
            ("signal_dims", config::list(&self.signal_dims)),
            ("signal_strength", config::float(self.signal_strength)),
            ("noise_scale", config::float(self.noise_scale)),
            ("class_distribution", config::float_list(&self.class_distribution)),
            ("seed", self.seed.to_string()),
            ("schema", config::string(self.schema)),
            ("test_fraction", config::float(self.test_fraction)),
            ("num_folds", self.num_folds.to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        match key {
            "task" => self.task = config::as_parsed(key, v)?,
            "num_videos" => self.num_videos = config::as_usize(key, v)?,
            "frames_min" => self.frames_min = config::as_usize(key, v)?,
            "frames_max" => self.frames_max = config::as_usize(key, v)?,
            "dim" => self.dim = config::as_usize(key, v)?,
            "signal_dims" => self.signal_dims = config::as_usize_list(key, v)?,
            "signal_strength" => self.signal_strength = config::as_f64(key, v)?,
            "noise_scale" => self.noise_scale = config::as_f64(key, v)?,
            "class_distribution" => self.class_distribution = config::as_f64_list(key, v)?,
            "seed" => self.seed = config::as_u64(key, v)?,
            "schema" => self.schema = config::as_parsed(key, v)?,
            "test_fraction" => self.test_fraction = config::as_f64(key, v)?,
            "num_folds" => self.num_folds = config::as_usize(key, v)?,
            _ => return Err(config::unknown(Self::NAME, key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |f: &str, r: String| Err(ConfigError::invalid(format!("data.{f}"), r));
        if self.num_videos == 0 {
            return bad("num_videos", "must be at least 1".into());
        }
        let min_frames = match self.task {
            TaskKind::OrderInvariant => 1,
            TaskKind::OrderDependent => 4,
        };
        if self.frames_min < min_frames || self.frames_min > self.frames_max {
            return bad(
                "frames_min",
                format!("need {min_frames} <= frames_min <= frames_max, got {}..{}", self.frames_min, self.frames_max),
            );
        }
        if self.dim == 0 {
            return bad("dim", "must be at least 1".into());
        }
        if self.signal_dims.is_empty() {
            return bad("signal_dims", "must not be empty".into());
        }
        if let Some(&d) = self.signal_dims.iter().find(|&&d| d >= self.dim) {
            return bad("signal_dims", format!("dimension {d} outside 0..{}", self.dim));
        }
        if self.task == TaskKind::OrderDependent && self.signal_dims.len() < 2 {
            return bad("signal_dims", "order_dependent needs at least 2 dims (two motifs)".into());
        }
        if !self.signal_strength.is_finite() {
            return bad("signal_strength", "must be finite".into());
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("noise_scale", "must be finite and non-negative".into());
        }
        let sum: f64 = self.class_distribution.iter().sum();
        if self.class_distribution.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return bad("class_distribution", format!("must be non-negative and sum to 1, sums to {sum}"));
        }
        if self.class_distribution.len() != self.schema.num_classes() {
            return bad(
                "class_distribution",
                format!(
                    "has {} classes but schema {} has {}",
                    self.class_distribution.len(),
                    self.schema,
                    self.schema.num_classes()
                ),
            );
        }
        if self.task == TaskKind::OrderDependent && self.num_classes() > 4 {
            return bad("class_distribution", "order_dependent supports at most 4 classes".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction", "must lie in [0, 1)".into());
        }
        if self.num_folds == 0 {
            return bad("num_folds", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Generated videos plus their manifest rows (feature paths relative to the
/// dataset directory).
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub spec: SyntheticTaskSpec,
    pub videos: Vec<FeatureSequence>,
    pub manifest: Vec<LabeledVideo>,
}

impl SyntheticDataset {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.spec.num_classes()];
        for v in &self.manifest {
            if let Some(c) = v.class(self.spec.schema) {
                counts[c] += 1;
            }
        }
        counts
    }

    /// Class index per video, in generation order.
    pub fn labels(&self) -> Vec<usize> {
        self.manifest
            .iter()
            .map(|v| v.class(self.spec.schema).expect("generated rows are labeled"))
            .collect()
    }
}

/// Largest-remainder class quotas, so realized class proportions match the
/// distribution as closely as the video count allows.
fn class_quotas(dist: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = dist.iter().map(|p| p * n as f64).collect();
    let mut q: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - q.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if dist[c] > 0.0 {
            q[c] += 1;
            left -= 1;
        }
    }
    q
}

/// Frame layout of one order-dependent video: 0 = background, 1 = A, 2 = B.
fn arrangement(class: usize, n: usize, rng: &mut rng::Rng) -> Vec<u8> {
    let m = ((0.15 * n as f64).round() as usize).max(1);
    let half = n / 2;
    let mut kinds = vec![0u8; n];
    let block = |start: usize, len: usize, kind: u8, kinds: &mut Vec<u8>| {
        kinds[start..start + len].iter_mut().for_each(|k| *k = kind);
    };
    match class {
        0 | 1 => {
            let (first, second) = if class == 0 { (1, 2) } else { (2, 1) };
            let s1 = rng.random_range(0..=half - m);
            let s2 = rng.random_range(half..=n - m);
            block(s1, m, first, &mut kinds);
            block(s2, m, second, &mut kinds);
        }
        2 => {
            let start = half - m;
            for i in 0..2 * m {
                kinds[start + i] = if i % 2 == 0 { 1 } else { 2 };
            }
        }
        _ => {
            let start = half - m;
            let a1 = m.div_ceil(2);
            block(start, a1, 1, &mut kinds);
            block(start + a1, m, 2, &mut kinds);
            block(start + a1 + m, m - a1, 1, &mut kinds);
        }
    }
    kinds
}

pub fn generate_synthetic(spec: &SyntheticTaskSpec) -> Result<SyntheticDataset, ConfigError> {
    spec.validate()?;
    let c = spec.num_classes();
    let mut labels: Vec<usize> = class_quotas(&spec.class_distribution, spec.num_videos)
        .iter()
        .enumerate()
        .flat_map(|(class, &q)| std::iter::repeat_n(class, q))
        .collect();
    labels.shuffle(&mut rng::stream(spec.seed, Stream::Labels));

    let (dims_a, dims_b) = spec.signal_dims.split_at(spec.signal_dims.len() / 2);
    let noise = Normal::new(0.0, spec.noise_scale.max(0.0)).expect("validated noise scale");
    let s = spec.signal_strength;

    let mut videos = Vec::with_capacity(spec.num_videos);
    for (i, &class) in labels.iter().enumerate() {
        let mut rng = rng::substream(spec.seed, Stream::Synthetic, &[i as u64]);
        let n = rng.random_range(spec.frames_min..=spec.frames_max);
        let d = spec.dim;
        let mut data = vec![0.0; n * d];
        match spec.task {
            TaskKind::OrderInvariant => {
                let frac = rng.random_range(0.10..=0.30);
                let k = ((frac * n as f64).round() as usize).clamp(1, n);
                let frames = rand::seq::index::sample(&mut rng, n, k);
                for f in frames.iter() {
                    for &dim in &spec.signal_dims {
                        data[f * d + dim] += class as f64 * s;
                    }
                }
            }
            TaskKind::OrderDependent => {
                for (f, kind) in arrangement(class, n, &mut rng).into_iter().enumerate() {
                    let dims = match kind {
                        1 => dims_a,
                        2 => dims_b,
                        _ => continue,
                    };
                    for &dim in dims {
                        data[f * d + dim] += s;
                    }
                }
            }
        }
        if spec.noise_scale > 0.0 {
            data.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        let data = data.into_iter().map(|v| v as f32 as f64).collect();
        let t = Tensor::matrix(n, d, data).expect("sized buffer");
        let id = format!("vid{i:04}");
        videos.push(FeatureSequence::synthetic(id, t).map_err(|e| ConfigError::invalid("data", e.to_string()))?);
    }

    // Stratified test hold-out, then stratified folds over the rest.
    let mut split = vec![Split::Train; spec.num_videos];
    let mut split_rng = rng::stream(spec.seed, Stream::Split);
    for class in 0..c {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut split_rng);
        let n_test = (spec.test_fraction * members.len() as f64).round() as usize;
        members[..n_test].iter().for_each(|&i| split[i] = Split::Test);
    }
    let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| split[i] == Split::Train).collect();
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let folds = make_folds(&train_labels, spec.num_folds, spec.seed);
    let mut fold_of = vec![None; labels.len()];
    for (&i, &f) in train_idx.iter().zip(&folds) {
        fold_of[i] = Some(f);
    }

    let manifest = videos
        .iter()
        .enumerate()
        .map(|(i, v)| LabeledVideo {
            video_id: v.video_id().to_string(),
            features_path: PathBuf::from("features").join(format!("{}.aff1", v.video_id())),
            labels: BTreeMap::from([(spec.schema, spec.schema.score_of(labels[i]))]),
            split: split[i],
            fold: fold_of[i],
        })
        .collect();
    Ok(SyntheticDataset {
        spec: spec.clone(),
        videos,
        manifest,
    })
}

/// Writes `features/*.aff1` and `manifest.csv` under `dir`; returns the
/// manifest path.
pub fn write_synthetic(dir: &Path, ds: &SyntheticDataset) -> Result<PathBuf, DataError> {
    let feat_dir = dir.join("features");
    std::fs::create_dir_all(&feat_dir).map_err(|e| DataError::io(&feat_dir, e))?;
    for (v, row) in ds.videos.iter().zip(&ds.manifest) {
        write_features(&dir.join(&row.features_path), v)?;
    }
    let manifest = dir.join("manifest.csv");
    let rows: Vec<LabeledVideo> = ds
        .manifest
        .iter()
        .map(|r| LabeledVideo {
            features_path: dir.join(&r.features_path),
            ..r.clone()
        })
        .collect();
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(task: TaskKind) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            task,
            num_videos: 40,
            frames_min: 10,
            frames_max: 20,
            dim: 8,
            signal_dims: vec![0, 1, 2, 3],
            signal_strength: 2.0,
            noise_scale: 0.0,
            seed: 7,
            ..SyntheticTaskSpec::default()
        }
    }

    #[test]
    fn class_zero_without_noise_is_all_zero() {
        let ds = generate_synthetic(&spec(TaskKind::OrderInvariant)).unwrap();
        let labels = ds.labels();
        for (v, &c) in ds.videos.iter().zip(&labels) {
            let nonzero_rows = (0..v.num_frames()).filter(|&f| v.features().row(f).iter().any(|&x| x != 0.0)).count();
            if c == 0 {
                assert_eq!(nonzero_rows, 0);
            } else {
                let frac = nonzero_rows as f64 / v.num_frames() as f64;
                assert!(nonzero_rows >= 1 && frac <= 0.35, "{frac}");
            }
        }
    }

    #[test]
    fn order_dependent_bags_share_frame_multiset() {
        let mut sp = spec(TaskKind::OrderDependent);
        sp.frames_min = 20;
        sp.frames_max = 20;
        let ds = generate_synthetic(&sp).unwrap();
        let summary = |v: &FeatureSequence| {
            let mut rows: Vec<Vec<u64>> =
                (0..v.num_frames()).map(|f| v.features().row(f).iter().map(|x| x.to_bits()).collect()).collect();
            rows.sort();
            rows
        };
        let first = summary(&ds.videos[0]);
        assert!(ds.videos.iter().all(|v| summary(v) == first));
        assert!(ds.class_counts().iter().all(|&c| c == 10));
    }

    #[test]
    fn deterministic_under_seed() {
        let mut sp = spec(TaskKind::OrderDependent);
        sp.noise_scale = 1.0;
        let a = generate_synthetic(&sp).unwrap();
        let b = generate_synthetic(&sp).unwrap();
        assert_eq!(a.videos, b.videos);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn split_and_folds_are_stratified() {
        let sp = SyntheticTaskSpec {
            num_videos: 100,
            ..spec(TaskKind::OrderInvariant)
        };
        let ds = generate_synthetic(&sp).unwrap();
        let test = ds.manifest.iter().filter(|r| r.split == Split::Test).count();
        assert_eq!(test, 20);
        assert!(ds.manifest.iter().all(|r| (r.split == Split::Train) == r.fold.is_some()));
    }

    #[test]
    fn signal_dims_outside_dim_rejected() {
        let mut sp = spec(TaskKind::OrderInvariant);
        sp.signal_dims = vec![8];
        let err = generate_synthetic(&sp).unwrap_err();
        assert_eq!(err.field().as_deref(), Some("data.signal_dims"));
    }

    #[test]
    fn quotas_sum_to_total() {
        assert_eq!(class_quotas(&[1.0 / 3.0; 3], 200), vec![67, 67, 66]);
        assert_eq!(class_quotas(&[0.9, 0.1], 10), vec![9, 1]);
    }
}
