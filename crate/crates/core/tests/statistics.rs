mod common;

use rand::Rng;
use severity_seq::metrics::{agreement, weighted_kappa, wilcoxon_signed_rank, WilcoxonMethod, Weighting, EXACT_MAX_N};

use common::{naive_kappa, percentile, rng};

#[test]
fn kappa_interval_matches_an_independent_resampler() {
    let mut r = rng(17);
    let n = 100;
    let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
    let pred: Vec<usize> = truth
        .iter()
        .map(|&t| if r.random_bool(0.6) { t } else { r.random_range(0..4) })
        .collect();
    let rep = agreement(&truth, &pred, 4, Weighting::Quadratic, 2000, 0.95, 3).unwrap();
    assert!((rep.kappa - weighted_kappa(&truth, &pred, 4, Weighting::Quadratic).unwrap()).abs() < 1e-15);

    let mut own = rng(99);
    let mut stats: Vec<f64> = (0..4000)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| own.random_range(0..n)).collect();
            let t: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
            let p: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
            naive_kappa(&t, &p, 4, 2)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&stats, 0.025), percentile(&stats, 0.975));
    assert!((rep.ci_low - lo).abs() < 0.02, "{} vs {lo}", rep.ci_low);
    assert!((rep.ci_high - hi).abs() < 0.02, "{} vs {hi}", rep.ci_high);
}

/// Exact null distribution of W+ for untied ranks 1..=n by subset-sum counting.
fn exact_two_sided(n: usize, w: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for k in 1..=n {
        for s in (k..=max).rev() {
            counts[s] += counts[s - k];
        }
    }
    let total = 2f64.powi(n as i32);
    let lo: f64 = counts[..=w].iter().sum::<f64>() / total;
    let hi: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lo.min(hi)).min(1.0)
}

#[test]
fn normal_approximation_tracks_the_exact_distribution() {
    let mut r = rng(23);
    let n = 30;
    assert!(n > EXACT_MAX_N);
    for _ in 0..20 {
        // Distinct magnitudes, so ranks are 1..=n.
        let shift: f64 = r.random_range(-0.6..0.6);
        let d: Vec<f64> = (1..=n)
            .map(|k| if r.random_bool(0.5 + shift / 2.0) { k as f64 } else { -(k as f64) })
            .collect();
        let res = wilcoxon_signed_rank(&d, &vec![0.0; n]).unwrap();
        assert_eq!(res.method, WilcoxonMethod::NormalApprox);
        let exact = exact_two_sided(n, res.w_plus as usize);
        assert!((res.p_value - exact).abs() < 0.01, "W+={} approx {} exact {exact}", res.w_plus, res.p_value);
    }
}

#[test]
fn kappa_is_symmetric_in_the_raters() {
    let mut r = rng(5);
    for _ in 0..50 {
        let a: Vec<usize> = (0..40).map(|_| r.random_range(0..5)).collect();
        let b: Vec<usize> = (0..40).map(|_| r.random_range(0..5)).collect();
        for w in [Weighting::Linear, Weighting::Quadratic] {
            let (x, y) = (weighted_kappa(&a, &b, 5, w).unwrap(), weighted_kappa(&b, &a, 5, w).unwrap());
            assert!((x - y).abs() < 1e-12);
        }
    }
}
