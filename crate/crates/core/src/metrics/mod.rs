//! Weighted F1, weighted Cohen's κ with bootstrap intervals, confusion
//! matrices and paired Wilcoxon signed-rank comparisons.

mod agreement;
mod confusion;
mod wilcoxon;

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{self, ConfigError, Section};
use crate::model::ScoreSchema;

pub use agreement::{agreement, bootstrap_ci, kappa_from_confusion, quantile, weighted_kappa, AgreementReport, Weighting};
pub use confusion::{weighted_f1, ConfusionMatrix};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("item {index}: class {value} outside 0..{classes}")]
    OutOfRange { index: usize, value: usize, classes: usize },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn check_pair(truth: &[usize], pred: &[usize], c: usize) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::Length {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    if c < 2 {
        return Err(MetricsError::Invalid(format!("need at least 2 classes, got {c}")));
    }
    for (index, &value) in truth.iter().chain(pred).enumerate() {
        if value >= c {
            return Err(MetricsError::OutOfRange {
                index: index % truth.len(),
                value,
                classes: c,
            });
        }
    }
    Ok(())
}

/// `[metrics]` config section.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsConfig {
    pub weighting: Weighting,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            weighting: Weighting::Quadratic,
            bootstrap_resamples: 1000,
            confidence: 0.95,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl Section for MetricsConfig {
    const NAME: &'static str = "metrics";

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("weighting", config::string(self.weighting)),
            ("bootstrap_resamples", self.bootstrap_resamples.to_string()),
            ("confidence", config::float(self.confidence)),
            ("alpha", config::float(self.alpha)),
            ("seed", self.seed.to_string()),
        ]
    }

    fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        match key {
            "weighting" => self.weighting = config::as_parsed(key, v)?,
            "bootstrap_resamples" => self.bootstrap_resamples = config::as_usize(key, v)?,
            "confidence" => self.confidence = config::as_f64(key, v)?,
            "alpha" => self.alpha = config::as_f64(key, v)?,
            "seed" => self.seed = config::as_u64(key, v)?,
            _ => return Err(config::unknown(Self::NAME, key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.bootstrap_resamples == 0 {
            return Err(ConfigError::invalid("metrics.bootstrap_resamples", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ConfigError::invalid("metrics.confidence", "must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::invalid("metrics.alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ABetter,
    BBetter,
    Tie,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::ABetter => "a_better",
            Direction::BBetter => "b_better",
            Direction::Tie => "tie",
        })
    }
}

/// Paired significance test of two methods on the same items.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub n: usize,
    pub n_effective: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub direction: Direction,
    pub no_signal: bool,
}

fn report_from(w: WilcoxonResult, alpha: f64, lower_is_better: bool) -> ComparisonReport {
    // Differences are a − b; W+ large means a's values are larger.
    let direction = if w.w_plus == w.w_minus {
        Direction::Tie
    } else if (w.w_plus > w.w_minus) != lower_is_better {
        Direction::ABetter
    } else {
        Direction::BBetter
    };
    ComparisonReport {
        n: w.n,
        n_effective: w.n_effective,
        statistic: w.statistic(),
        p_value: w.p_value,
        alpha,
        significant: w.p_value < alpha,
        direction,
        no_signal: w.no_signal(),
    }
}

/// Pairs per-item squared errors `(pred − truth)²` of methods A and B.
pub fn compare_methods(truth: &[usize], pred_a: &[usize], pred_b: &[usize], alpha: f64) -> Result<ComparisonReport, MetricsError> {
    if truth.len() != pred_a.len() || truth.len() != pred_b.len() {
        return Err(MetricsError::Length {
            left: pred_a.len(),
            right: pred_b.len().max(truth.len()),
        });
    }
    let err = |p: &[usize]| -> Vec<f64> {
        truth
            .iter()
            .zip(p)
            .map(|(&t, &q)| {
                let d = q as f64 - t as f64;
                d * d
            })
            .collect()
    };
    let w = wilcoxon_signed_rank(&err(pred_a), &err(pred_b))?;
    Ok(report_from(w, alpha, true))
}

/// Pairs per-fold scores where higher is better (e.g. weighted F1).
pub fn compare_scores(scores_a: &[f64], scores_b: &[f64], alpha: f64) -> Result<ComparisonReport, MetricsError> {
    let w = wilcoxon_signed_rank(scores_a, scores_b)?;
    Ok(report_from(w, alpha, false))
}

/// Full evaluation of one prediction set.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub schema: ScoreSchema,
    pub confusion: ConfusionMatrix,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub agreement: AgreementReport,
}

pub fn evaluate(truth: &[usize], pred: &[usize], schema: ScoreSchema, cfg: &MetricsConfig) -> Result<MetricsReport, MetricsError> {
    let c = schema.num_classes();
    let confusion = ConfusionMatrix::new(truth, pred, c)?;
    let agreement = agreement(truth, pred, c, cfg.weighting, cfg.bootstrap_resamples, cfg.confidence, cfg.seed)?;
    Ok(MetricsReport {
        schema,
        weighted_f1: confusion.weighted_f1(),
        accuracy: confusion.accuracy(),
        confusion,
        agreement,
    })
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let a = &self.agreement;
        let mut s = String::new();
        let _ = writeln!(s, "schema: {}", self.schema);
        let _ = writeln!(s, "n: {}", a.n);
        let _ = writeln!(s, "weighted_f1: {:.6}", self.weighted_f1);
        let _ = writeln!(s, "accuracy: {:.6}", self.accuracy);
        let _ = writeln!(
            s,
            "kappa_{}: {:.6} (CI{:.0} {:.6}-{:.6}, {} resamples, seed {})",
            a.weighting,
            a.kappa,
            a.confidence * 100.0,
            a.ci_low,
            a.ci_high,
            a.n_resamples,
            a.seed
        );
        let _ = writeln!(s, "confusion (rows = truth, cols = prediction):");
        for (i, row) in self.confusion.counts().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
            let _ = writeln!(s, "  {:>3} |{}", self.schema.score_of(i), cells.join(""));
        }
        s
    }

    /// Machine-readable form: a confusion block then a scalar block.
    pub fn to_delimited(&self) -> String {
        let c = self.confusion.num_classes();
        let mut s = String::from("# confusion\ntruth");
        for j in 0..c {
            let _ = write!(s, ",pred_{}", self.schema.score_of(j));
        }
        s.push('\n');
        for (i, row) in self.confusion.counts().iter().enumerate() {
            let _ = write!(s, "{}", self.schema.score_of(i));
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        let a = &self.agreement;
        s.push_str("# scalars\nmetric,value\n");
        let _ = writeln!(s, "n,{}", a.n);
        let _ = writeln!(s, "weighted_f1,{:.9}", self.weighted_f1);
        let _ = writeln!(s, "accuracy,{:.9}", self.accuracy);
        let _ = writeln!(s, "kappa,{:.9}", a.kappa);
        let _ = writeln!(s, "kappa_weighting,{}", a.weighting);
        let _ = writeln!(s, "kappa_ci_low,{:.9}", a.ci_low);
        let _ = writeln!(s, "kappa_ci_high,{:.9}", a.ci_high);
        let _ = writeln!(s, "bootstrap_resamples,{}", a.n_resamples);
        let _ = writeln!(s, "bootstrap_seed,{}", a.seed);
        s
    }
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        format!(
            "n: {}\nn_effective: {}\nW: {}\np_value: {:.6}\nalpha: {}\nsignificant: {}\ndirection: {}\nno_signal: {}\n",
            self.n,
            self.n_effective,
            self.statistic,
            self.p_value,
            self.alpha,
            self.significant,
            self.direction,
            self.no_signal
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_strictly_better_is_borderline_significant() {
        let truth = [0, 1, 2, 3, 1];
        let a = truth;
        let b = [1, 3, 0, 0, 3];
        let r = compare_methods(&truth, &a, &b, 0.05).unwrap();
        assert_eq!(r.direction, Direction::ABetter);
        assert_eq!(r.n_effective, 5);
        assert!(r.p_value <= 0.0625);
    }

    #[test]
    fn identical_methods() {
        let truth = [0, 1, 2];
        let r = compare_methods(&truth, &[0, 0, 0], &[0, 0, 0], 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
        assert!(r.no_signal);
        assert_eq!(r.alpha, 0.05);
    }

    #[test]
    fn delimited_report_has_both_blocks() {
        let r = evaluate(&[0, 1, 2, 1], &[0, 1, 1, 1], ScoreSchema::Vascular, &MetricsConfig::default()).unwrap();
        let d = r.to_delimited();
        assert!(d.starts_with("# confusion\ntruth,pred_0,pred_1,pred_2\n"));
        assert!(d.contains("# scalars\n"));
        assert!(r.to_text().contains("kappa_quadratic"));
    }
}
