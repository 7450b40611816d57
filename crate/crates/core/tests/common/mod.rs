//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use severity_seq::model::Model;
use severity_seq::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Overwrites every parameter with uniform noise in `[-scale, scale)`.
pub fn randomize(model: &mut Model, scale: f64, rng: &mut ChaCha8Rng) {
    for t in model.params_mut().tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
}

/// Support-weighted mean of per-class F1 from explicit TP/FP/FN counts.
pub fn naive_weighted_f1(truth: &[usize], pred: &[usize], c: usize) -> f64 {
    let n = truth.len() as f64;
    let mut total = 0.0;
    for k in 0..c {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == k, p == k) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1 * (tp + fn_) / n;
    }
    total
}

/// Cohen's weighted kappa straight from the definition
/// `1 − Σ w·O / Σ w·E` with `w = (|i−j|/(c−1))^power`.
pub fn naive_kappa(truth: &[usize], pred: &[usize], c: usize, power: i32) -> f64 {
    let n = truth.len() as f64;
    let mut observed = vec![vec![0.0; c]; c];
    for (&t, &p) in truth.iter().zip(pred) {
        observed[t][p] += 1.0 / n;
    }
    let rows: Vec<f64> = (0..c).map(|i| (0..c).map(|j| observed[i][j]).sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| (0..c).map(|i| observed[i][j]).sum()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..c {
        for j in 0..c {
            let w = ((i as f64 - j as f64).abs() / (c - 1) as f64).powi(power);
            num += w * observed[i][j];
            den += w * rows[i] * cols[j];
        }
    }
    1.0 - num / den
}

/// Two-sided signed-rank p by enumerating every sign assignment.
pub fn enumeration_wilcoxon_p(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|a| {
            let below = d.iter().filter(|b| b.abs() < a.abs()).count() as f64;
            let equal = d.iter().filter(|b| b.abs() == a.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut lo, mut hi) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            lo += 1;
        }
        if w >= observed - 1e-9 {
            hi += 1;
        }
    }
    (2.0 * lo.min(hi) as f64 / (1u64 << n) as f64).min(1.0)
}

/// `softmax(Q Kᵀ / √d_k) V` with explicit loops.
pub fn brute_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Vec<Vec<f64>> {
    let (nq, dk) = (q.shape()[0], q.shape()[1]);
    let (nk, dv) = (k.shape()[0], v.shape()[1]);
    let mut out = vec![vec![0.0; dv]; nq];
    for i in 0..nq {
        let scores: Vec<f64> = (0..nk)
            .map(|j| (0..dk).map(|t| q.at(i, t) * k.at(j, t)).sum::<f64>() / (dk as f64).sqrt())
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..nk {
            for c in 0..dv {
                out[i][c] += e[j] / z * v.at(j, c);
            }
        }
    }
    out
}

/// `x W + b` with explicit loops.
pub fn brute_linear(x: &[Vec<f64>], w: &Tensor, b: &Tensor) -> Vec<Vec<f64>> {
    let (din, dout) = (w.shape()[0], w.shape()[1]);
    x.iter()
        .map(|row| (0..dout).map(|o| b.data()[o] + (0..din).map(|i| row[i] * w.at(i, o)).sum::<f64>()).collect())
        .collect()
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.shape()[0]).map(|r| t.row(r).to_vec()).collect()
}

pub fn to_tensor(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Sample quantile by linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
