use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{train, AblationId, RunRecord, RunSplits, TrainConfig, TrainError, TrainJob};
use crate::data::{Dataset, Split};
use crate::metrics::{compare_methods, compare_scores, ComparisonReport, MetricsConfig};
use crate::model::ModelConfig;

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Result of k-fold cross-validation.
#[derive(Clone, Debug)]
pub struct CvResult {
    pub records: Vec<RunRecord>,
    /// Validation weighted F1 of each fold's retained model.
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// Population standard deviation across folds.
    pub std_f1: f64,
    /// Out-of-fold `(example index, predicted class)`, sorted by index.
    pub out_of_fold: Vec<(usize, usize)>,
}

impl CvResult {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (r, f) in self.records.iter().zip(&self.fold_f1) {
            let _ = writeln!(s, "{}: weighted_f1 {f:.6} (best epoch {})", r.label, r.best_epoch);
        }
        let _ = writeln!(
            s,
            "aggregate weighted_f1: {:.6} ± {:.6} (mean ± std across {} folds)",
            self.mean_f1,
            self.std_f1,
            self.fold_f1.len()
        );
        s
    }
}

/// Trains one model per fold of the train split, each validated on its
/// held-out fold. Folds run in parallel.
pub fn cross_validate(
    model: &ModelConfig,
    cfg: &TrainConfig,
    metrics: &MetricsConfig,
    data: &Dataset,
    k: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<CvResult, TrainError> {
    let train_idx = data.indices(Split::Train);
    if k < 2 {
        return Err(TrainError::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    if let Some(&i) = train_idx.iter().find(|&&i| data.examples[i].fold.is_none_or(|f| f >= k)) {
        let ex = &data.examples[i];
        return Err(TrainError::Folds(format!(
            "{} has fold {:?}, expected a fold id in 0..{k}",
            ex.video.video_id(),
            ex.fold
        )));
    }
    let outcomes: Vec<_> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (tr, va) = data.fold_split(fold);
            let label = match cfg.ablation {
                Some(a) => format!("{a}/fold-{fold}"),
                None => format!("fold-{fold}"),
            };
            train(&TrainJob {
                model,
                train: cfg,
                metrics,
                data,
                splits: RunSplits {
                    train: tr,
                    validation: va,
                    test: Vec::new(),
                },
                checkpoint: checkpoint_dir.map(|d| d.join(format!("{}.ckpt", label.replace('/', "-")))),
                label,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(k);
    let mut fold_f1 = Vec::with_capacity(k);
    let mut out_of_fold = Vec::new();
    for o in outcomes {
        fold_f1.push(o.record.validation_f1().unwrap_or(0.0));
        out_of_fold.extend(o.validation_predictions);
        records.push(o.record);
    }
    out_of_fold.sort_unstable();
    let (mean_f1, std_f1) = mean_std(&fold_f1);
    Ok(CvResult {
        records,
        fold_f1,
        mean_f1,
        std_f1,
        out_of_fold,
    })
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub id: AblationId,
    pub model: ModelConfig,
    pub cv: CvResult,
    /// Against the full model: paired per-video squared errors of the
    /// out-of-fold predictions. `None` on the full model's own row.
    pub per_video: Option<ComparisonReport>,
    /// Against the full model: paired per-fold weighted F1.
    pub per_fold: Option<ComparisonReport>,
}

/// The four ablation rows in fixed order.
#[derive(Clone, Debug)]
pub struct AblationTable {
    pub schema: crate::model::ScoreSchema,
    pub k: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, id: AblationId) -> &AblationRow {
        self.rows.iter().find(|r| r.id == id).expect("all four rows present")
    }

    pub fn report(&self) -> String {
        let mut s = format!(
            "# ablation ({}, {}-fold weighted F1, mean ± std across folds)\nablation,positional_encoding,transformer,aggregator,mean_f1,std_f1,p_vs_full_per_video,p_vs_full_per_fold\n",
            self.schema, self.k
        );
        for r in &self.rows {
            let p = |c: &Option<ComparisonReport>| c.as_ref().map_or("-".to_string(), |c| format!("{:.6}", c.p_value));
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{},{}",
                r.id,
                r.model.use_positional_encoding,
                r.model.use_transformer,
                r.model.aggregator,
                r.cv.mean_f1,
                r.cv.std_f1,
                p(&r.per_video),
                p(&r.per_fold)
            );
        }
        s
    }
}

/// Cross-validates all four ablation settings with the same seed, data and
/// folds, and compares each against `transformer_attn_mil`.
pub fn run_ablation(
    model: &ModelConfig,
    cfg: &TrainConfig,
    metrics: &MetricsConfig,
    data: &Dataset,
    k: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<AblationTable, TrainError> {
    let mut results = Vec::with_capacity(4);
    for id in AblationId::ALL {
        let c = TrainConfig {
            ablation: Some(id),
            ..cfg.clone()
        };
        let cv = cross_validate(model, &c, metrics, data, k, checkpoint_dir)?;
        results.push((id, c.effective_model(model), cv));
    }
    let full = &results[3].2;
    let truth: Vec<usize> = full.out_of_fold.iter().map(|&(i, _)| data.examples[i].class).collect();
    let full_pred: Vec<usize> = full.out_of_fold.iter().map(|&(_, p)| p).collect();
    let full_f1 = full.fold_f1.clone();
    let mut rows = Vec::with_capacity(4);
    for (id, m, cv) in results {
        let (per_video, per_fold) = if id == AblationId::TransformerAttnMil {
            (None, None)
        } else {
            let pred: Vec<usize> = cv.out_of_fold.iter().map(|&(_, p)| p).collect();
            (
                Some(compare_methods(&truth, &pred, &full_pred, metrics.alpha)?),
                Some(compare_scores(&cv.fold_f1, &full_f1, metrics.alpha)?),
            )
        };
        rows.push(AblationRow {
            id,
            model: m,
            cv,
            per_video,
            per_fold,
        });
    }
    Ok(AblationTable {
        schema: data.schema,
        k,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[0.4; 4]).1, 0.0);
    }
}
