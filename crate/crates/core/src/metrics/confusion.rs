use super::{check_pair, MetricsError};

/// `C × C` counts; rows are truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<Self, MetricsError> {
        check_pair(truth, pred, num_classes)?;
        let mut counts = vec![vec![0; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(pred) {
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let c = counts.len();
        if c < 2 || counts.iter().any(|r| r.len() != c) {
            return Err(MetricsError::Invalid("confusion matrix must be square with C >= 2".into()));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.num_classes()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total().max(1) as f64
    }

    /// Per-class F1; a zero denominator gives 0.
    pub fn per_class_f1(&self) -> Vec<f64> {
        let rows = self.row_sums();
        let cols = self.col_sums();
        (0..self.num_classes())
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let denom = (rows[c] + cols[c]) as f64;
                if denom == 0.0 {
                    0.0
                } else {
                    2.0 * tp / denom
                }
            })
            .collect()
    }

    /// Support-weighted mean of per-class F1.
    pub fn weighted_f1(&self) -> f64 {
        let support = self.row_sums();
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.per_class_f1()
            .iter()
            .zip(&support)
            .map(|(f, &s)| f * s as f64)
            .sum::<f64>()
            / total as f64
    }
}

pub fn weighted_f1(truth: &[usize], pred: &[usize], num_classes: usize) -> Result<f64, MetricsError> {
    Ok(ConfusionMatrix::new(truth, pred, num_classes)?.weighted_f1())
}
