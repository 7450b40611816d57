use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::{EpochRecord, RunRecord, Selection, TrainConfig, TrainError};
use crate::config::Section;
use crate::data::{Dataset, WeightedSampler};
use crate::metrics::{evaluate, weighted_f1, MetricsConfig};
use crate::model::{predict, save_checkpoint, CheckpointMeta, Model, ModelConfig, ModelError};
use crate::optim::{AdamW, AdamWConfig, OptimError};
use crate::rng::{self, Stream, RNG_ALGORITHM};
use crate::tensor::{Precision, Tensor};

/// Example indices (into [`Dataset::examples`]) for one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSplits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// One training run.
#[derive(Clone, Debug)]
pub struct TrainJob<'a> {
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub metrics: &'a MetricsConfig,
    pub data: &'a Dataset,
    pub splits: RunSplits,
    /// Where the retained parameters are written, if anywhere.
    pub checkpoint: Option<PathBuf>,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub record: RunRecord,
    /// The retained model.
    pub model: Model,
    /// `(example index, predicted class)` for the validation set under the
    /// retained model.
    pub validation_predictions: Vec<(usize, usize)>,
}

/// Elementwise sum of per-example gradient lists, reduced pairwise in a
/// fixed tree order so the result does not depend on scheduling.
pub fn tree_sum(mut parts: Vec<Vec<Tensor>>) -> Vec<Tensor> {
    assert!(!parts.is_empty());
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.data_mut().iter_mut().zip(y.data()).for_each(|(p, q)| *p += q);
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

fn round_params(model: &mut Model, precision: Precision) {
    if precision == Precision::F32 {
        model.params_mut().tensors_mut().iter_mut().for_each(Tensor::round_to_f32);
    }
}

/// Eval-mode class predictions for `idx`, in order.
pub fn predict_indices(model: &Model, data: &Dataset, idx: &[usize]) -> Result<Vec<usize>, ModelError> {
    idx.par_iter()
        .map(|&i| model.predict_video(&data.examples[i].video).map(|p| predict(&p.logits)))
        .collect()
}

fn class_weights(classes: &[usize], c: usize) -> Vec<f64> {
    let mut counts = vec![0usize; c];
    classes.iter().for_each(|&k| counts[k] += 1);
    let n = classes.len() as f64;
    counts
        .iter()
        .map(|&k| if k == 0 { 0.0 } else { n / (c as f64 * k as f64) })
        .collect()
}

fn divergence(epoch: usize, step: usize, checkpoint: &Option<PathBuf>, saved: bool) -> TrainError {
    TrainError::Divergence {
        epoch,
        step,
        checkpoint: if saved { checkpoint.clone() } else { None },
    }
}

/// Trains one model with weighted sampling and AdamW.
///
/// Each epoch runs `ceil(train / batch_size)` steps. A step draws
/// `batch_size` videos from the class-balanced sampler, computes per-video
/// gradients in parallel (dropout streams keyed by epoch, step and slot),
/// sums them in a fixed tree order and applies one update with the mean.
pub fn train(job: &TrainJob<'_>) -> Result<TrainOutcome, TrainError> {
    let started = Instant::now();
    let cfg = job.train;
    cfg.validate()?;
    let model_cfg = cfg.effective_model(job.model);
    model_cfg.validate()?;
    let data = job.data;
    if model_cfg.schema != data.schema {
        return Err(TrainError::Config(format!(
            "model schema {} does not match dataset schema {}",
            model_cfg.schema, data.schema
        )));
    }
    if let Some(d) = data.dim() {
        if d != model_cfg.feature_dim {
            return Err(TrainError::Model(ModelError::Dimension {
                expected: model_cfg.feature_dim,
                actual: d,
            }));
        }
    }
    let splits = &job.splits;
    if splits.train.is_empty() {
        return Err(TrainError::Config("empty training split".into()));
    }
    let train_classes = data.classes(&splits.train);
    let sampler = WeightedSampler::new(&train_classes, data.schema)?;
    let weights = cfg
        .class_weighted_loss
        .then(|| class_weights(&train_classes, data.num_classes()));

    let mut model = Model::init(model_cfg.clone(), cfg.seed)?;
    round_params(&mut model, cfg.precision);
    let mut opt = AdamW::new(
        AdamWConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        model.params().tensors(),
    );
    let meta = CheckpointMeta::new(cfg.seed, cfg.precision);
    let mut sample_rng = rng::stream(cfg.seed, Stream::Sampler);
    let steps = splits.train.len().div_ceil(cfg.batch_size);
    let inv_bs = 1.0 / cfg.batch_size as f64;

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Model)> = None;
    let mut saved = false;
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for step in 0..steps {
            let batch: Vec<usize> = sampler
                .sample_n(cfg.batch_size, &mut sample_rng)
                .into_iter()
                .map(|k| splits.train[k])
                .collect();
            let results: Vec<(f64, Vec<Tensor>)> = batch
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let ex = &data.examples[i];
                    let mut r = rng::substream(cfg.seed, Stream::Dropout, &[epoch as u64, step as u64, slot as u64]);
                    model.train_loss_and_gradients(ex.video.features(), ex.class, weights.as_deref(), &mut r)
                })
                .collect::<Result<_, _>>()?;
            let loss: f64 = results.iter().map(|(l, _)| l).sum::<f64>() * inv_bs;
            if !loss.is_finite() {
                return Err(divergence(epoch, step, &job.checkpoint, saved));
            }
            loss_sum += loss;
            let mut grads = tree_sum(results.into_iter().map(|(_, g)| g).collect());
            grads
                .iter_mut()
                .for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= inv_bs));
            match opt.step(model.params_mut().tensors_mut(), &grads) {
                Ok(()) => {}
                Err(OptimError::NonFiniteGradient { .. }) => {
                    return Err(divergence(epoch, step, &job.checkpoint, saved))
                }
                Err(e) => return Err(TrainError::Optim(e)),
            }
            round_params(&mut model, cfg.precision);
        }

        let validate = !splits.validation.is_empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
        let val_f1 = if validate {
            let pred = predict_indices(&model, data, &splits.validation)?;
            let truth = data.classes(&splits.validation);
            Some(weighted_f1(&truth, &pred, data.num_classes())?)
        } else {
            None
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            val_weighted_f1: val_f1,
        });
        log::info!(
            "{}: epoch {epoch}/{} loss {:.6}{}",
            job.label,
            cfg.epochs,
            loss_sum / steps as f64,
            val_f1.map_or(String::new(), |f| format!(" val_f1 {f:.4}"))
        );

        let improved = match (cfg.selection, val_f1, &best) {
            (Selection::BestValidation, Some(f), Some((_, b, _))) => f > *b,
            (Selection::BestValidation, Some(_), None) => true,
            (Selection::BestValidation, None, _) => splits.validation.is_empty() && epoch == cfg.epochs,
            (Selection::LastEpoch, _, _) => epoch == cfg.epochs,
        };
        if improved {
            if let Some(path) = &job.checkpoint {
                save_checkpoint(path, &model, &meta)?;
                saved = true;
            }
            best = Some((epoch, val_f1.unwrap_or(f64::NAN), model.clone()));
        }
    }

    let (best_epoch, best_f1, retained) = best.expect("final epoch always retains");
    let (validation, validation_predictions) = if splits.validation.is_empty() {
        (None, Vec::new())
    } else {
        let pred = predict_indices(&retained, data, &splits.validation)?;
        let truth = data.classes(&splits.validation);
        let report = evaluate(&truth, &pred, data.schema, job.metrics)?;
        (Some(report), splits.validation.iter().copied().zip(pred).collect())
    };
    let test = if splits.test.is_empty() {
        None
    } else {
        let pred = predict_indices(&retained, data, &splits.test)?;
        Some(evaluate(&data.classes(&splits.test), &pred, data.schema, job.metrics)?)
    };
    let record = RunRecord {
        label: job.label.clone(),
        config_echo: format!("{}\n{}", model_cfg.to_section_string(), cfg.to_section_string()),
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        num_parameters: retained.num_parameters(),
        train_size: splits.train.len(),
        validation_size: splits.validation.len(),
        epochs,
        best_epoch,
        best_val_weighted_f1: best_f1.is_finite().then_some(best_f1),
        validation,
        test,
        checkpoint: job.checkpoint.clone(),
        wall_clock: started.elapsed(),
    };
    Ok(TrainOutcome {
        record,
        model: retained,
        validation_predictions,
    })
}

/// Writes a run report next to its checkpoint.
pub fn write_report(path: &Path, record: &RunRecord) -> Result<(), TrainError> {
    std::fs::write(path, record.report()).map_err(|e| TrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
