use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::rng::{self, Stream};

/// Stratified fold ids for items with class labels `labels`.
///
/// Members of each class are shuffled (seeded) and dealt round-robin with
/// a counter that carries over between classes, so per-class counts across
/// folds differ by at most one and fold sizes stay balanced.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1, "k must be positive");
    if labels.len() < k {
        log::warn!("{} items for {k} folds; some folds will be empty", labels.len());
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = rng::stream(seed, Stream::Folds);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for (class, members) in by_class.iter_mut() {
        if members.len() < k {
            log::warn!("class {class} has {} members for {k} folds; stratification is best effort", members.len());
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

/// `counts[fold][class]`.
pub fn per_fold_class_counts(labels: &[usize], folds: &[usize], k: usize, num_classes: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0; num_classes]; k];
    for (&c, &f) in labels.iter().zip(folds) {
        counts[f][c] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn balanced_two_class() {
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let folds = make_folds(&labels, 4, 11);
        let counts = per_fold_class_counts(&labels, &folds, 4, 2);
        assert!(counts.iter().all(|c| c == &vec![1, 1]));
    }

    #[test]
    fn deterministic() {
        let labels: Vec<usize> = (0..37).map(|i| i % 3).collect();
        assert_eq!(make_folds(&labels, 4, 5), make_folds(&labels, 4, 5));
    }

    #[test]
    fn random_labels_within_one() {
        let mut rng = rng::stream(99, Stream::Labels);
        let labels: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
        let folds = make_folds(&labels, 4, 3);
        let counts = per_fold_class_counts(&labels, &folds, 4, 4);
        for c in 0..4 {
            let per: Vec<usize> = counts.iter().map(|f| f[c]).collect();
            assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
        }
        let sizes: Vec<usize> = counts.iter().map(|f| f.iter().sum()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 100);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
