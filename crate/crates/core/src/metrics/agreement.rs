use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::{check_pair, ConfusionMatrix, MetricsError};
use crate::rng::{self, Stream};

/// Disagreement penalty between ordinal classes `i` and `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    /// `|i − j| / (C − 1)`
    Linear,
    /// `(i − j)² / (C − 1)²`
    #[default]
    Quadratic,
}

impl Weighting {
    pub fn weight(self, i: usize, j: usize, c: usize) -> f64 {
        let d = i.abs_diff(j) as f64 / (c - 1) as f64;
        match self {
            Weighting::Linear => d,
            Weighting::Quadratic => d * d,
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Linear => "linear",
            Weighting::Quadratic => "quadratic",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Weighting::Linear),
            "quadratic" => Ok(Weighting::Quadratic),
            other => Err(format!("unknown weighting `{other}` (expected linear or quadratic)")),
        }
    }
}

/// κ from a confusion matrix.
///
/// Degenerate marginals (no expected disagreement): κ = 1 when there is no
/// observed disagreement either, otherwise κ = 0 with a warning.
pub fn kappa_from_confusion(m: &ConfusionMatrix, weighting: Weighting) -> f64 {
    let c = m.num_classes();
    let n = m.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let rows = m.row_sums();
    let cols = m.col_sums();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..c {
        for j in 0..c {
            let w = weighting.weight(i, j, c);
            observed += w * m.get(i, j) as f64 / n;
            expected += w * (rows[i] as f64 / n) * (cols[j] as f64 / n);
        }
    }
    if expected == 0.0 {
        if observed == 0.0 {
            return 1.0;
        }
        log::warn!("weighted kappa: degenerate marginals (zero expected disagreement); reporting 0");
        return 0.0;
    }
    1.0 - observed / expected
}

pub fn weighted_kappa(truth: &[usize], pred: &[usize], num_classes: usize, weighting: Weighting) -> Result<f64, MetricsError> {
    Ok(kappa_from_confusion(&ConfusionMatrix::new(truth, pred, num_classes)?, weighting))
}

/// Percentile bootstrap interval of `statistic` over paired resamples.
///
/// Quantiles use linear interpolation between order statistics.
pub fn bootstrap_ci<F>(
    truth: &[usize],
    pred: &[usize],
    statistic: F,
    n_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<(f64, f64), MetricsError>
where
    F: Fn(&[usize], &[usize]) -> f64,
{
    if truth.len() != pred.len() {
        return Err(MetricsError::Length {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let n = truth.len();
    if n < 2 {
        return Err(MetricsError::Invalid(format!("bootstrap needs n >= 2, got {n}")));
    }
    if n_resamples == 0 || !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricsError::Invalid("bootstrap needs resamples >= 1 and 0 < confidence < 1".into()));
    }
    let mut rng = rng::stream(seed, Stream::Bootstrap);
    let mut t = vec![0; n];
    let mut p = vec![0; n];
    let mut stats: Vec<f64> = (0..n_resamples)
        .map(|_| {
            for k in 0..n {
                let i = rng.random_range(0..n);
                t[k] = truth[i];
                p[k] = pred[i];
            }
            statistic(&t, &p)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok((quantile(&stats, tail), quantile(&stats, 1.0 - tail)))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Weighted κ with a percentile bootstrap interval.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub kappa: f64,
    pub weighting: Weighting,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub n: usize,
}

/// κ point estimate plus its bootstrap interval. The interval is widened to
/// contain the point estimate when the resampling quantiles miss it.
pub fn agreement(
    truth: &[usize],
    pred: &[usize],
    num_classes: usize,
    weighting: Weighting,
    n_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<AgreementReport, MetricsError> {
    check_pair(truth, pred, num_classes)?;
    let kappa = weighted_kappa(truth, pred, num_classes, weighting)?;
    let stat = |t: &[usize], p: &[usize]| {
        ConfusionMatrix::new(t, p, num_classes).map_or(0.0, |m| kappa_from_confusion(&m, weighting))
    };
    let (lo, hi) = if truth.len() >= 2 {
        bootstrap_ci(truth, pred, stat, n_resamples, confidence, seed)?
    } else {
        (kappa, kappa)
    };
    Ok(AgreementReport {
        kappa,
        weighting,
        ci_low: lo.min(kappa),
        ci_high: hi.max(kappa),
        confidence,
        n_resamples,
        seed,
        n: truth.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        for w in [Weighting::Linear, Weighting::Quadratic] {
            assert_eq!(weighted_kappa(&[0, 1, 2, 3, 1], &[0, 1, 2, 3, 1], 4, w).unwrap(), 1.0);
        }
    }

    #[test]
    fn swapped_binary_is_minus_one() {
        let k = weighted_kappa(&[0, 0, 1, 1], &[1, 1, 0, 0], 2, Weighting::Quadratic).unwrap();
        assert!((k + 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_penalizes_far_confusion_more() {
        let base = vec![vec![10, 0, 0, 0], vec![0, 10, 0, 0], vec![0, 0, 10, 0], vec![0, 0, 0, 10]];
        let mut near = base.clone();
        near[0][0] -= 2;
        near[0][1] += 2;
        let mut far = base;
        far[0][0] -= 2;
        far[0][3] += 2;
        let k = |m: Vec<Vec<u64>>| kappa_from_confusion(&ConfusionMatrix::from_counts(m).unwrap(), Weighting::Quadratic);
        assert!(k(far) < k(near));
    }

    #[test]
    fn degenerate_marginals() {
        // Both raters constant and equal: perfect agreement.
        assert_eq!(weighted_kappa(&[1, 1, 1], &[1, 1, 1], 3, Weighting::Linear).unwrap(), 1.0);
    }

    #[test]
    fn bootstrap_zero_variance_and_determinism() {
        let t = [0, 1, 2, 0, 1, 2];
        let r = agreement(&t, &t, 3, Weighting::Quadratic, 200, 0.95, 1).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (1.0, 1.0));
        let p = [0, 2, 2, 0, 1, 1];
        let a = agreement(&t, &p, 3, Weighting::Quadratic, 200, 0.95, 9).unwrap();
        let b = agreement(&t, &p, 3, Weighting::Quadratic, 200, 0.95, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.kappa && a.kappa <= a.ci_high);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&s, 0.5), 1.5);
        assert_eq!(quantile(&s, 0.0), 0.0);
        assert_eq!(quantile(&s, 1.0), 3.0);
    }
}
