//! Paired comparison of two prediction files against manifest labels.

use std::fmt::Write as _;

use crate::data::LabeledVideo;
use crate::metrics::{compare_methods, evaluate, ComparisonReport, MetricsConfig, MetricsReport};
use crate::model::ScoreSchema;

use super::predictions::Predictions;

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub schema: ScoreSchema,
    pub video_ids: Vec<String>,
    pub a: MetricsReport,
    pub b: MetricsReport,
    /// Wilcoxon on paired per-video squared errors.
    pub test: ComparisonReport,
}

impl CompareReport {
    pub fn delta_weighted_f1(&self) -> f64 {
        self.a.weighted_f1 - self.b.weighted_f1
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("schema: {}\nvideos: {}\n", self.schema, self.video_ids.len());
        for (name, m) in [("a", &self.a), ("b", &self.b)] {
            let g = &m.agreement;
            let _ = writeln!(s, "{name}.weighted_f1: {:.6}", m.weighted_f1);
            let _ = writeln!(
                s,
                "{name}.kappa_{}: {:.6} (CI{:.0} {:.6}-{:.6})",
                g.weighting,
                g.kappa,
                g.confidence * 100.0,
                g.ci_low,
                g.ci_high
            );
        }
        let _ = writeln!(s, "delta_weighted_f1 (a - b): {:.6}", self.delta_weighted_f1());
        s.push_str("# wilcoxon signed-rank on paired squared errors\n");
        s.push_str(&self.test.to_text());
        s
    }
}

/// Requires A and B to list the same video ids in the same order, each with
/// a label in `truth`. Errors name the first offending id.
pub fn compare_predictions(
    a: &Predictions,
    b: &Predictions,
    truth: &[LabeledVideo],
    cfg: &MetricsConfig,
) -> Result<CompareReport, String> {
    let schema = a.schema;
    if b.schema != schema {
        return Err(format!("schemas differ: {} vs {}", a.schema, b.schema));
    }
    if a.rows.is_empty() {
        return Err("prediction files are empty".into());
    }
    let n = a.rows.len().max(b.rows.len());
    for i in 0..n {
        match (a.rows.get(i), b.rows.get(i)) {
            (Some(x), Some(y)) if x.video_id == y.video_id => {}
            (x, y) => {
                let id = x.or(y).map_or("?", |r| r.video_id.as_str());
                return Err(format!("video ids misaligned at row {}: first mismatched id `{id}`", i + 1));
            }
        }
    }
    let labels: std::collections::HashMap<&str, usize> = truth
        .iter()
        .filter_map(|r| r.class(schema).map(|c| (r.video_id.as_str(), c)))
        .collect();
    let mut t = Vec::with_capacity(n);
    for r in &a.rows {
        let c = labels
            .get(r.video_id.as_str())
            .ok_or_else(|| format!("first mismatched id `{}`: no {schema} label in the truth manifest", r.video_id))?;
        t.push(*c);
    }
    let class = |p: &Predictions| -> Vec<usize> {
        p.rows.iter().map(|r| schema.class_of(r.predicted).expect("validated on read")).collect()
    };
    let (pa, pb) = (class(a), class(b));
    let err = |e: crate::metrics::MetricsError| e.to_string();
    Ok(CompareReport {
        schema,
        video_ids: a.rows.iter().map(|r| r.video_id.clone()).collect(),
        a: evaluate(&t, &pa, schema, cfg).map_err(err)?,
        b: evaluate(&t, &pb, schema, cfg).map_err(err)?,
        test: compare_methods(&t, &pa, &pb, cfg.alpha).map_err(err)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::predictions::PredictionRow;
    use crate::data::Split;
    use std::collections::BTreeMap;

    fn preds(ids: &[&str], scores: &[u8]) -> Predictions {
        Predictions {
            schema: ScoreSchema::Vascular,
            rows: ids
                .iter()
                .zip(scores)
                .map(|(id, &s)| PredictionRow {
                    video_id: id.to_string(),
                    truth: None,
                    predicted: s,
                    probabilities: vec![1.0 / 3.0; 3],
                })
                .collect(),
        }
    }

    fn truth(ids: &[&str], scores: &[u8]) -> Vec<LabeledVideo> {
        ids.iter()
            .zip(scores)
            .map(|(id, &s)| LabeledVideo {
                video_id: id.to_string(),
                features_path: "x".into(),
                labels: BTreeMap::from([(ScoreSchema::Vascular, s)]),
                split: Split::Test,
                fold: None,
            })
            .collect()
    }

    #[test]
    fn identical_methods_tie() {
        let ids = ["a", "b", "c", "d"];
        let p = preds(&ids, &[0, 1, 2, 1]);
        let r = compare_predictions(&p, &p, &truth(&ids, &[0, 1, 1, 1]), &MetricsConfig::default()).unwrap();
        assert_eq!(r.delta_weighted_f1(), 0.0);
        assert_eq!(r.test.p_value, 1.0);
        assert!(!r.test.significant);
    }

    #[test]
    fn misalignment_names_first_id() {
        let t = truth(&["a", "b"], &[0, 1]);
        let err = compare_predictions(&preds(&["a", "b"], &[0, 1]), &preds(&["a", "c"], &[0, 1]), &t, &MetricsConfig::default())
            .unwrap_err();
        assert!(err.contains("`b`"), "{err}");
        let err = compare_predictions(&preds(&["a", "z"], &[0, 1]), &preds(&["a", "z"], &[0, 1]), &t, &MetricsConfig::default())
            .unwrap_err();
        assert!(err.contains("`z`"), "{err}");
    }
}
