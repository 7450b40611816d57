//! Delimited per-video predictions.
//!
//! ```text
//! # schema: vascular
//! video_id,truth,predicted,p_0,p_1,p_2
//! vid0000,2,2,0.01,0.04,0.95
//! ```
//!
//! `truth` is empty when the manifest row has no label for the schema.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::ScoreSchema;
use crate::train::ScoredVideo;

#[derive(Debug, Error)]
pub enum PredictionsError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub video_id: String,
    pub truth: Option<u8>,
    pub predicted: u8,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub schema: ScoreSchema,
    pub rows: Vec<PredictionRow>,
}

impl Predictions {
    pub fn from_scored(schema: ScoreSchema, scored: &[ScoredVideo]) -> Self {
        let rows = scored
            .iter()
            .map(|s| PredictionRow {
                video_id: s.video_id.clone(),
                truth: s.truth,
                predicted: s.prediction.trace.predicted_score,
                probabilities: s.prediction.trace.per_class_probabilities.clone(),
            })
            .collect();
        Self { schema, rows }
    }

    /// Floats use the shortest exact representation.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema: {}\nvideo_id,truth,predicted", self.schema);
        for c in 0..self.schema.num_classes() {
            let _ = write!(s, ",p_{}", self.schema.score_of(c));
        }
        s.push('\n');
        for r in &self.rows {
            let truth = r.truth.map_or(String::new(), |t| t.to_string());
            let _ = write!(s, "{},{truth},{}", r.video_id, r.predicted);
            for p in &r.probabilities {
                let _ = write!(s, ",{p}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, PredictionsError> {
        let invalid = |reason: String| PredictionsError::Invalid {
            path: path.to_string(),
            reason,
        };
        let schema: ScoreSchema = text
            .lines()
            .find_map(|l| l.strip_prefix("# schema:"))
            .ok_or_else(|| invalid("missing `# schema:` line".into()))?
            .trim()
            .parse()
            .map_err(invalid)?;
        let c = schema.num_classes();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let csv_err = |source| PredictionsError::Csv {
            path: path.to_string(),
            source,
        };
        let header = reader.headers().map_err(csv_err)?.clone();
        if header.len() != 3 + c || &header[0] != "video_id" {
            return Err(invalid(format!("expected video_id,truth,predicted and {c} probability columns")));
        }
        let score = |v: &str, what: &str, row: usize| -> Result<u8, PredictionsError> {
            v.parse::<u8>()
                .ok()
                .filter(|&s| schema.class_of(s).is_some())
                .ok_or_else(|| invalid(format!("row {row}: {what} `{v}` is not a {schema} score")))
        };
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = i + 1;
            let truth = match &rec[1] {
                "" => None,
                v => Some(score(v, "truth", row)?),
            };
            let probabilities = (3..3 + c)
                .map(|j| rec[j].parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("row {row}: probability: {e}")))?;
            rows.push(PredictionRow {
                video_id: rec[0].to_string(),
                truth,
                predicted: score(&rec[2], "predicted", row)?,
                probabilities,
            });
        }
        Ok(Self { schema, rows })
    }

    pub fn read(path: &Path) -> Result<Self, PredictionsError> {
        let text = std::fs::read_to_string(path).map_err(|e| PredictionsError::Invalid {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Predictions {
        Predictions {
            schema: ScoreSchema::Vascular,
            rows: vec![
                PredictionRow {
                    video_id: "a".into(),
                    truth: Some(2),
                    predicted: 1,
                    probabilities: vec![0.1, 0.6, 0.30000000000000004],
                },
                PredictionRow {
                    video_id: "b".into(),
                    truth: None,
                    predicted: 0,
                    probabilities: vec![1.0, 0.0, 0.0],
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let p = sample();
        let text = p.to_csv();
        assert!(text.starts_with("# schema: vascular\nvideo_id,truth,predicted,p_0,p_1,p_2\n"));
        assert_eq!(Predictions::parse(&text, "x").unwrap(), p);
    }

    #[test]
    fn rejects_out_of_schema_scores() {
        let text = sample().to_csv().replace("a,2,1", "a,3,1");
        let err = Predictions::parse(&text, "x").unwrap_err();
        assert!(err.to_string().contains("truth `3`"), "{err}");
        assert!(Predictions::parse("video_id,truth\n", "x").is_err());
    }
}
