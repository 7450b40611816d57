//! AdamW: Adam with decoupled weight decay.

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("non-finite gradient in parameter {index} (training diverged)")]
    NonFiniteGradient { index: usize },
    #[error("parameter {index}: shape {param:?} does not match gradient shape {grad:?}")]
    Shape {
        index: usize,
        param: Vec<usize>,
        grad: Vec<usize>,
    },
    #[error("expected {expected} gradients, got {actual}")]
    Count { expected: usize, actual: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: first and second moments per parameter plus the step count.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            step: 0,
            first_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.first_moment[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.second_moment[index]
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), OptimError> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(OptimError::Count {
                expected: self.first_moment.len(),
                actual: grads.len(),
            });
        }
        for (index, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.len() != self.first_moment[index].len() {
                return Err(OptimError::Shape {
                    index,
                    param: p.shape().to_vec(),
                    grad: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(OptimError::NonFiniteGradient { index });
            }
        }

        self.step += 1;
        let AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for (((w, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *w -= lr * wd * *w;
                *mj = b1 * *mj + (1.0 - b1) * gj;
                *vj = b2 * *vj + (1.0 - b2) * gj * gj;
                let m_hat = *mj / bc1;
                let v_hat = *vj / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_noop() {
        let mut p = vec![Tensor::vector(vec![1.5, -2.0]).unwrap()];
        let before = p.clone();
        let mut opt = AdamW::new(cfg(1e-2, 0.0), &p);
        opt.step(&mut p, &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn one_step_hand_calculation() {
        // m1 = 0.1 g, v1 = 0.001 g²; bias-corrected m̂ = g, v̂ = g².
        // w1 = w0 (1 − lr·wd) − lr · g / (|g| + eps)
        let (w0, g, lr, wd) = (0.5, 0.2, 0.01, 0.1);
        let mut p = vec![Tensor::scalar(w0)];
        let mut opt = AdamW::new(cfg(lr, wd), &p);
        opt.step(&mut p, &[Tensor::scalar(g)]).unwrap();
        let expected = w0 * (1.0 - lr * wd) - lr * g / (g.abs() + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
        assert!((opt.first_moment(0)[0] - 0.1 * g).abs() < 1e-15);
        assert!((opt.second_moment(0)[0] - 0.001 * g * g).abs() < 1e-18);
    }

    #[test]
    fn decoupled_decay_only() {
        let (w0, lr, wd) = (2.0, 0.1, 0.05);
        let mut p = vec![Tensor::scalar(w0)];
        let mut opt = AdamW::new(cfg(lr, wd), &p);
        opt.step(&mut p, &[Tensor::scalar(0.0)]).unwrap();
        assert!((p[0].data()[0] - (w0 - lr * wd * w0)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_signals_divergence() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut opt = AdamW::new(cfg(0.1, 0.0), &p);
        let err = opt.step(&mut p, &[Tensor::scalar(f64::NAN)]).unwrap_err();
        assert_eq!(err, OptimError::NonFiniteGradient { index: 0 });
        assert_eq!(p[0].data()[0], 1.0);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut opt = AdamW::new(cfg(0.1, 0.0), &p);
        assert!(matches!(opt.step(&mut p, &[Tensor::zeros(&[3])]), Err(OptimError::Shape { .. })));
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = vec![Tensor::vector(vec![3.0, -4.0]).unwrap()];
        let mut opt = AdamW::new(cfg(0.05, 0.0), &p);
        for _ in 0..2000 {
            let g = p[0].map(|w| 2.0 * w);
            opt.step(&mut p, &[g]).unwrap();
        }
        assert!(p[0].data().iter().all(|w| w.abs() < 1e-2), "{:?}", p[0]);
    }
}
