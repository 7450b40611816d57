//! Weighted F1, weighted kappa with a bootstrap interval, and a paired Wilcoxon comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use severity_seq::metrics::{compare_methods, evaluate, wilcoxon_signed_rank, MetricsConfig};
use severity_seq::model::ScoreSchema;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let truth: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
    let noisy = |p: f64, rng: &mut ChaCha8Rng| -> Vec<usize> {
        truth.iter().map(|&t| if rng.random_bool(p) { t } else { rng.random_range(0..4) }).collect()
    };
    let a = noisy(0.8, &mut rng);
    let b = noisy(0.5, &mut rng);

    let cfg = MetricsConfig::default();
    print!("{}", evaluate(&truth, &a, ScoreSchema::Mes, &cfg)?.to_text());
    print!("{}", compare_methods(&truth, &a, &b, cfg.alpha)?.to_text());

    let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5])?;
    println!("five positive differences: W+ = {}, exact p = {}", w.w_plus, w.p_value);
    Ok(())
}
