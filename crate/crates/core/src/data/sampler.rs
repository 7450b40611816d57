use rand::distr::{weighted::WeightedIndex, Distribution};

use super::DataError;
use crate::model::ScoreSchema;
use crate::rng::Rng;

/// Draws item indices with replacement, each with probability inversely
/// proportional to its class frequency, so every class is drawn equally
/// often in expectation.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    dist: WeightedIndex<f64>,
    len: usize,
}

impl WeightedSampler {
    /// Requires every class of `schema` to be present.
    pub fn new(labels: &[usize], schema: ScoreSchema) -> Result<Self, DataError> {
        let counts = class_counts(labels, schema.num_classes())?;
        let missing: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == 0).collect();
        if !missing.is_empty() {
            return Err(DataError::EmptyClass {
                schema,
                classes: missing,
            });
        }
        Self::build(labels, &counts)
    }

    /// Balances over the classes that occur; absent classes are ignored.
    pub fn from_present_classes(labels: &[usize]) -> Result<Self, DataError> {
        let c = labels.iter().max().map_or(0, |m| m + 1);
        let counts = class_counts(labels, c)?;
        Self::build(labels, &counts)
    }

    fn build(labels: &[usize], counts: &[usize]) -> Result<Self, DataError> {
        let w: Vec<f64> = labels.iter().map(|&c| 1.0 / counts[c] as f64).collect();
        let dist = WeightedIndex::new(&w).map_err(|e| DataError::Invalid(format!("sampler: {e}")))?;
        Ok(Self { dist, len: labels.len() })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.dist.sample(rng)
    }

    pub fn sample_n(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

fn class_counts(labels: &[usize], c: usize) -> Result<Vec<usize>, DataError> {
    if labels.is_empty() {
        return Err(DataError::Invalid("sampler needs at least one item".into()));
    }
    let mut counts = vec![0; c];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| DataError::Invalid(format!("class {l} outside 0..{c}")))? += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn class_hist(labels: &[usize], draws: &[usize], c: usize) -> Vec<usize> {
        let mut h = vec![0; c];
        draws.iter().for_each(|&i| h[labels[i]] += 1);
        h
    }

    #[test]
    fn ninety_ten_is_rebalanced() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let s = WeightedSampler::from_present_classes(&labels).unwrap();
        let draws = s.sample_n(10_000, &mut stream(1, Stream::Sampler));
        let h = class_hist(&labels, &draws, 2);
        // 3 sigma of Binomial(10^4, 1/2) is 150.
        assert!(h.iter().all(|&c| (c as i64 - 5000).abs() <= 150), "{h:?}");
    }

    #[test]
    fn balanced_data_is_uniform_over_items() {
        let labels = [0, 1, 2, 3];
        let s = WeightedSampler::new(&labels, ScoreSchema::Mes).unwrap();
        let draws = s.sample_n(8000, &mut stream(2, Stream::Sampler));
        let h = class_hist(&labels, &draws, 4);
        assert!(h.iter().all(|&c| (c as i64 - 2000).abs() <= 3 * 39), "{h:?}");
    }

    #[test]
    fn single_class_always_drawn() {
        let labels = [2, 2, 2];
        let s = WeightedSampler::from_present_classes(&labels).unwrap();
        let draws = s.sample_n(100, &mut stream(3, Stream::Sampler));
        assert!(draws.iter().all(|&i| labels[i] == 2));
    }

    #[test]
    fn missing_class_is_listed() {
        match WeightedSampler::new(&[0, 0, 2], ScoreSchema::Vascular) {
            Err(DataError::EmptyClass { classes, .. }) => assert_eq!(classes, vec![1]),
            other => panic!("{other:?}"),
        }
    }
}
