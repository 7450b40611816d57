//! Dataset manifests: one CSV row per video.
//!
//! ```text
//! video_id,features,mes,bleeding,erosion,vascular,split,fold
//! vid0001,features/vid0001.aff1,2,1,,0,train,3
//! vid0002,features/vid0002.aff1,0,,,,test,
//! ```
//!
//! Empty score cells mean "unlabeled for that schema". Feature paths are
//! resolved relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::DataError;
use crate::model::ScoreSchema;

pub const MANIFEST_HEADER: [&str; 8] = [
    "video_id", "features", "mes", "bleeding", "erosion", "vascular", "split", "fold",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train or test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVideo {
    pub video_id: String,
    pub features_path: PathBuf,
    pub labels: BTreeMap<ScoreSchema, u8>,
    pub split: Split,
    pub fold: Option<usize>,
}

impl LabeledVideo {
    pub fn label(&self, schema: ScoreSchema) -> Option<u8> {
        self.labels.get(&schema).copied()
    }

    /// Class index for `schema`, when labeled.
    pub fn class(&self, schema: ScoreSchema) -> Option<usize> {
        self.label(schema).and_then(|s| schema.class_of(s))
    }

    fn check(&self, row: usize) -> Result<(), DataError> {
        for (schema, &score) in &self.labels {
            if !schema.contains(score as i64) {
                return Err(DataError::ScoreRange {
                    row,
                    schema: *schema,
                    value: score as i64,
                });
            }
        }
        match (self.split, self.fold) {
            (Split::Train, None) => Err(DataError::Manifest {
                row,
                reason: "train rows need a fold id".into(),
            }),
            (Split::Test, Some(_)) => Err(DataError::Manifest {
                row,
                reason: "test rows must not carry a fold id".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// Parses and validates a manifest without touching feature files.
pub fn read_manifest(path: &Path) -> Result<Vec<LabeledVideo>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// [`read_manifest`] plus an existence check of every feature file.
pub fn load_manifest(path: &Path) -> Result<Vec<LabeledVideo>, DataError> {
    let videos = read_manifest(path)?;
    for (i, v) in videos.iter().enumerate() {
        if !v.features_path.is_file() {
            return Err(DataError::MissingFeatures {
                row: i + 2,
                path: v.features_path.clone(),
            });
        }
    }
    Ok(videos)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<LabeledVideo>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| DataError::Manifest {
        row: 1,
        reason: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(DataError::Manifest {
            row: 1,
            reason: format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| DataError::Manifest {
            row,
            reason: e.to_string(),
        })?;
        let bad = |reason: String| DataError::Manifest { row, reason };
        let video_id = rec[0].to_string();
        if video_id.is_empty() {
            return Err(bad("empty video_id".into()));
        }
        if !seen.insert(video_id.clone()) {
            return Err(bad(format!("duplicate video_id `{video_id}`")));
        }
        let rel = PathBuf::from(&rec[1]);
        let features_path = if rel.is_absolute() { rel } else { base.join(rel) };
        let mut labels = BTreeMap::new();
        for (col, schema) in (2..6).zip(ScoreSchema::ALL) {
            let cell = &rec[col];
            if cell.is_empty() {
                continue;
            }
            let value: i64 = cell
                .parse()
                .map_err(|_| bad(format!("{schema} score `{cell}` is not an integer")))?;
            if !schema.contains(value) {
                return Err(DataError::ScoreRange { row, schema, value });
            }
            labels.insert(schema, value as u8);
        }
        let split: Split = rec[6].parse().map_err(bad)?;
        let fold = match &rec[7] {
            "" => None,
            f => Some(f.parse::<usize>().map_err(|_| bad(format!("fold `{f}` is not a non-negative integer")))?),
        };
        let v = LabeledVideo {
            video_id,
            features_path,
            labels,
            split,
            fold,
        };
        v.check(row)?;
        out.push(v);
    }
    Ok(out)
}

/// Writes a manifest. Feature paths under `base` are stored relative to it.
pub fn write_manifest(path: &Path, videos: &[LabeledVideo]) -> Result<(), DataError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let text = format_manifest(videos, base)?;
    std::fs::write(path, text).map_err(|e| DataError::io(path, e))
}

pub fn format_manifest(videos: &[LabeledVideo], base: &Path) -> Result<String, DataError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| DataError::Invalid(e.to_string());
    w.write_record(MANIFEST_HEADER).map_err(err)?;
    for (i, v) in videos.iter().enumerate() {
        v.check(i + 2)?;
        let rel = v.features_path.strip_prefix(base).unwrap_or(&v.features_path);
        let mut rec = vec![v.video_id.clone(), rel.to_string_lossy().replace('\\', "/")];
        for schema in ScoreSchema::ALL {
            rec.push(v.label(schema).map(|s| s.to_string()).unwrap_or_default());
        }
        rec.push(v.split.to_string());
        rec.push(v.fold.map(|f| f.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Number of videos per fold id (train rows only).
pub fn fold_histogram(videos: &[LabeledVideo]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for f in videos.iter().filter_map(|v| v.fold) {
        *h.entry(f).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "video_id,features,mes,bleeding,erosion,vascular,split,fold\n";

    #[test]
    fn rejects_out_of_range_mes() {
        let text = format!("{HEADER}v1,a.aff1,5,,,,train,0\n");
        match parse_manifest(&text, Path::new(".")) {
            Err(DataError::ScoreRange {
                row: 2,
                schema: ScoreSchema::Mes,
                value: 5,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn accepts_vascular_two_rejects_three() {
        let ok = format!("{HEADER}v1,a.aff1,,,,2,train,0\n");
        let v = parse_manifest(&ok, Path::new("/data")).unwrap();
        assert_eq!(v[0].label(ScoreSchema::Vascular), Some(2));
        assert_eq!(v[0].features_path, PathBuf::from("/data/a.aff1"));
        let bad = format!("{HEADER}v1,a.aff1,,,,3,train,0\n");
        assert!(matches!(
            parse_manifest(&bad, Path::new(".")),
            Err(DataError::ScoreRange {
                schema: ScoreSchema::Vascular,
                ..
            })
        ));
    }

    #[test]
    fn ten_rows_and_fold_histogram() {
        let mut text = HEADER.to_string();
        let folds = [0, 1, 2, 3, 0, 1, 2, 0];
        for (i, f) in folds.iter().enumerate() {
            text.push_str(&format!("v{i},f{i}.aff1,{},,,,train,{f}\n", i % 4));
        }
        text.push_str("t0,t0.aff1,1,,,,test,\nt1,t1.aff1,,,,,test,\n");
        let v = parse_manifest(&text, Path::new(".")).unwrap();
        assert_eq!(v.len(), 10);
        let h = fold_histogram(&v);
        assert_eq!(h.get(&0), Some(&3));
        assert_eq!(h.get(&1), Some(&2));
        assert_eq!(h.get(&2), Some(&2));
        assert_eq!(h.get(&3), Some(&1));
    }

    #[test]
    fn fold_presence_must_match_split() {
        let text = format!("{HEADER}v1,a.aff1,1,,,,train,\n");
        assert!(matches!(parse_manifest(&text, Path::new(".")), Err(DataError::Manifest { row: 2, .. })));
        let text = format!("{HEADER}v1,a.aff1,1,,,,test,1\n");
        assert!(parse_manifest(&text, Path::new(".")).is_err());
    }

    #[test]
    fn missing_feature_file_fails_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, format!("{HEADER}v1,missing.aff1,1,,,,train,0\n")).unwrap();
        assert!(read_manifest(&path).is_ok());
        assert!(matches!(load_manifest(&path), Err(DataError::MissingFeatures { row: 2, .. })));
    }

    #[test]
    fn format_round_trip() {
        let text = format!("{HEADER}v1,feat/a.aff1,1,2,0,2,train,3\nv2,feat/b.aff1,,,,,test,\n");
        let base = Path::new("/x");
        let v = parse_manifest(&text, base).unwrap();
        assert_eq!(format_manifest(&v, base).unwrap(), text);
    }
}
