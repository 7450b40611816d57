//! Finite-difference verification of reverse-mode gradients.

use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("step size {0} outside [1e-6, 1e-3]")]
    StepSize(f64),
    #[error("function value is not finite ({0})")]
    NonFinite(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Gradients smaller than this are compared in absolute rather than relative
/// terms; below it central differences are dominated by round-off.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(parameter index, element index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences `(f(θ+h) − f(θ−h)) / 2h` for every coordinate of `params`.
///
/// `f` receives a fresh tape and one trainable variable per parameter and must
/// be deterministic (seed any dropout inside it).
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport, GradCheckError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
{
    if !(1e-6..=1e-3).contains(&h) {
        return Err(GradCheckError::StepSize(h));
    }
    let eval = |ps: &[Tensor]| -> Result<f64, GradCheckError> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let v = f(&tape, &vars)?.item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GradCheckError::NonFinite(v))
        }
    };

    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = params.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&tape, &vars)?;
        if !out.item().is_finite() {
            return Err(GradCheckError::NonFinite(out.item()));
        }
        let mut grads = tape.backward(out)?;
        vars.iter()
            .zip(params)
            .map(|(v, p)| grads.take_or_zeros(*v, p.shape()))
            .collect()
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for ei in 0..p.len() {
            let orig = p.data()[ei];
            work[pi].data_mut()[ei] = orig + h;
            let plus = eval(&work)?;
            work[pi].data_mut()[ei] = orig - h;
            let minus = eval(&work)?;
            work[pi].data_mut()[ei] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi].data()[ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            report.coordinates += 1;
            if rel > report.max_relative_error || report.coordinates == 1 {
                report.max_relative_error = rel;
                report.worst = (pi, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn random(shape: &[usize], rng: &mut crate::rng::Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn square() {
        let r = grad_check(|_, v| v[0].mul(v[0]), &[Tensor::scalar(3.0)], 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-8, "{r:?}");
        assert!((r.analytic - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(matches!(
            grad_check(|_, v| Ok(v[0]), &[Tensor::scalar(1.0)], 1e-2),
            Err(GradCheckError::StepSize(_))
        ));
    }

    #[test]
    fn non_finite_is_an_error() {
        let r = grad_check(|_, v| Ok(v[0].scale(f64::INFINITY).sum()), &[Tensor::scalar(1.0)], 1e-5);
        assert!(matches!(r, Err(GradCheckError::NonFinite(_))));
    }

    #[test]
    fn softmax_cross_entropy_composite() {
        let mut rng = stream(3, Stream::Init);
        let x = random(&[3, 4], &mut rng);
        let r = grad_check(|_, v| v[0].softmax().scale(3.0).cross_entropy(&[0, 3, 1], None), &[x], 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn each_smooth_op() {
        let mut rng = stream(4, Stream::Init);
        let a = random(&[3, 4], &mut rng);
        let b = random(&[4, 2], &mut rng);
        let c = random(&[5, 4], &mut rng);
        let bias = random(&[4], &mut rng);
        let gain = random(&[4], &mut rng);
        let w = random(&[3, 4], &mut rng);
        let ps = [a, b, c, bias, gain, w];

        type Case = for<'a> fn(&[Var<'a>]) -> Result<Var<'a>, TensorError>;
        let cases: [(&str, Case); 11] = [
            ("matmul", |v| Ok(v[0].matmul(v[1])?.mul(v[0].matmul(v[1])?)?.sum())),
            ("matmul_t", |v| Ok(v[0].matmul_t(v[2])?.tanh().sum())),
            ("add_row", |v| Ok(v[0].add_row(v[3])?.tanh().sum())),
            ("transpose", |v| Ok(v[0].transpose()?.matmul(v[5])?.sum())),
            ("softmax", |v| Ok(v[0].softmax().mul(v[5])?.sum())),
            ("layer_norm", |v| Ok(v[0].layer_norm(v[4], v[3], 1e-5)?.mul(v[5])?.sum())),
            ("tanh", |v| Ok(v[0].tanh().mul(v[5])?.sum())),
            ("concat", |v| {
                let c = Var::concat_cols(&[v[0], v[5]])?;
                Ok(c.mul(c)?.sum())
            }),
            ("mean_rows", |v| Ok(v[2].mean_rows()?.tanh().sum())),
            ("scale_add", |v| Ok(v[0].scale(0.3).add(v[5])?.tanh().sum())),
            ("cross_entropy", |v| v[0].cross_entropy(&[1, 0, 3], Some(&[0.5, 1.0, 2.0, 1.5]))),
        ];
        for (name, case) in cases {
            let r = grad_check(|_, v| case(v), &ps, 1e-5).unwrap();
            assert!(r.max_relative_error < 1e-6, "{name}: {r:?}");
        }
    }

    #[test]
    fn piecewise_ops() {
        let mut rng = stream(8, Stream::Init);
        let x = random(&[4, 5], &mut rng);
        let w = random(&[4, 5], &mut rng);
        let r = grad_check(|_, v| Ok(v[0].relu().mul(v[1])?.sum()), &[x.clone(), w.clone()], 1e-6).unwrap();
        assert!(r.max_relative_error < 1e-4, "relu {r:?}");
        let r = grad_check(
            |_, v| {
                let (m, _) = v[0].max_rows()?;
                Ok(m.tanh().sum())
            },
            &[x.clone()],
            1e-6,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "max {r:?}");
        let r = grad_check(
            |_, v| {
                let mut rng = stream(1, Stream::Dropout);
                Ok(v[0].dropout(0.4, true, &mut rng)?.mul(v[1])?.sum())
            },
            &[x, w],
            1e-6,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "dropout {r:?}");
    }
}
