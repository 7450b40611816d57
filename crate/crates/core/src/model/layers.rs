//! Building blocks of the sequence classifier, expressed over tape variables.

use crate::autodiff::Var;
use crate::rng::Rng;
use crate::tensor::{Tensor, TensorError};

use super::config::LAYER_NORM_EPS;
use super::ModelError;

/// Forward-pass mode. Dropout is active only in [`Mode::Train`].
pub enum Mode<'r> {
    Eval,
    Train(&'r mut Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub fn dropout<'t>(&mut self, x: Var<'t>, rate: f64) -> Result<Var<'t>, TensorError> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train(rng) => x.dropout(rate, true, rng),
        }
    }
}

/// `x · weight + bias` with `weight` stored as `[in, out]`.
#[derive(Clone, Copy, Debug)]
pub struct Linear<'t> {
    pub weight: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> Linear<'t> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        x.matmul(self.weight)?.add_row(self.bias)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Norm<'t> {
    pub gain: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> Norm<'t> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        x.layer_norm(self.gain, self.bias, LAYER_NORM_EPS)
    }
}

/// Per-head query/key/value projections.
#[derive(Clone, Copy, Debug)]
pub struct HeadParams<'t> {
    pub query: Linear<'t>,
    pub key: Linear<'t>,
    pub value: Linear<'t>,
}

#[derive(Clone, Debug)]
pub struct MhaParams<'t> {
    pub heads: Vec<HeadParams<'t>>,
    pub out: Linear<'t>,
}

#[derive(Clone, Debug)]
pub struct EncoderParams<'t> {
    pub attention: MhaParams<'t>,
    pub norm1: Norm<'t>,
    pub ffn_in: Linear<'t>,
    pub ffn_out: Linear<'t>,
    pub norm2: Norm<'t>,
}

/// Attention-MIL parameters: `projection` is `[D, L]`, `score` is `[L, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct MilParams<'t> {
    pub projection: Var<'t>,
    pub score: Var<'t>,
}

/// Sinusoidal position table:
/// `PE(pos, 2i) = sin(pos / 10000^(2i/D))`, `PE(pos, 2i+1) = cos(pos / 10000^(2i/D))`.
pub fn positional_encoding(n: usize, d: usize) -> Result<Tensor, ModelError> {
    if n == 0 || d == 0 {
        return Err(ModelError::Config(format!(
            "positional encoding needs n >= 1 and d >= 1, got n={n}, d={d}"
        )));
    }
    if d % 2 != 0 {
        return Err(ModelError::Config(format!(
            "positional encoding pairs sine/cosine columns; dimension {d} is odd"
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    let denom: Vec<f64> = (0..d / 2).map(|i| 10000f64.powf((2 * i) as f64 / d as f64)).collect();
    for pos in 0..n {
        for q in &denom {
            let angle = pos as f64 / q;
            data.push(angle.sin());
            data.push(angle.cos());
        }
    }
    Ok(Tensor::matrix(n, d, data)?)
}

/// Row-stochastic attention matrix `softmax(Q Kᵀ / √d_k)`.
pub fn attention_matrix<'t>(q: Var<'t>, k: Var<'t>) -> Result<Var<'t>, TensorError> {
    let dk = q.value().dims2("attention")?.1;
    Ok(q.matmul_t(k)?.scale(1.0 / (dk as f64).sqrt()).softmax())
}

/// `softmax(Q Kᵀ / √d_k) V`.
pub fn scaled_dot_attention<'t>(q: Var<'t>, k: Var<'t>, v: Var<'t>) -> Result<Var<'t>, TensorError> {
    let (nk, _) = k.value().dims2("attention")?;
    let (nv, _) = v.value().dims2("attention")?;
    if nk != nv {
        return Err(TensorError::ShapeMismatch {
            op: "attention",
            left: k.shape(),
            right: v.shape(),
        });
    }
    attention_matrix(q, k)?.matmul(v)
}

/// Self-attention `Concat(head_1..head_h) W_O` with
/// `head_i = Attention(X W_i^Q, X W_i^K, X W_i^V)`.
pub fn multi_head_attention<'t>(x: Var<'t>, p: &MhaParams<'t>) -> Result<Var<'t>, TensorError> {
    let heads = p
        .heads
        .iter()
        .map(|h| scaled_dot_attention(h.query.forward(x)?, h.key.forward(x)?, h.value.forward(x)?))
        .collect::<Result<Vec<_>, _>>()?;
    let concat = if heads.len() == 1 { heads[0] } else { Var::concat_cols(&heads)? };
    p.out.forward(concat)
}

/// Post-norm encoder block:
/// `X → LN(X + Dropout(MHA(X))) → LN(· + Dropout(FFN(·)))`, FFN with ReLU.
pub fn encoder_layer<'t>(
    x: Var<'t>,
    p: &EncoderParams<'t>,
    dropout: f64,
    mode: &mut Mode<'_>,
) -> Result<Var<'t>, TensorError> {
    let attn = multi_head_attention(x, &p.attention)?;
    let h = p.norm1.forward(x.add(mode.dropout(attn, dropout)?)?)?;
    let ff = p.ffn_out.forward(p.ffn_in.forward(h)?.relu())?;
    p.norm2.forward(h.add(mode.dropout(ff, dropout)?)?)
}

/// Attention-MIL pooling: `a = softmax_k(wᵀ tanh(V h_k))`, `z = Σ_k a_k h_k`.
///
/// Returns `z` as `[1, D]` and the weights as `[1, N]`.
pub fn attention_mil_aggregate<'t>(h: Var<'t>, p: &MilParams<'t>) -> Result<(Var<'t>, Var<'t>), ModelError> {
    let (n, _) = h.value().dims2("attention_mil")?;
    if n == 0 {
        return Err(ModelError::EmptyBag);
    }
    let scores = h.matmul(p.projection)?.tanh().matmul(p.score)?; // [N, 1]
    let weights = scores.transpose()?.softmax(); // [1, N]
    let z = weights.matmul(h)?;
    Ok((z, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::rng::{stream, Stream};
    use rand::Rng as _;

    fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn pe_first_row_and_known_values() {
        let pe = positional_encoding(3, 4).unwrap();
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        // pos=1, i=0: sin(1); pos=1, i=1, D=4: sin(1 / 10000^(2/4)) = sin(0.01)
        assert!((pe.at(1, 0) - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!((pe.at(1, 2) - 0.009_999_833_334_166_665).abs() < 1e-15);
        assert!(positional_encoding(3, 5).is_err());
    }

    #[test]
    fn attention_single_key_returns_value() {
        let mut rng = stream(1, Stream::Init);
        let tape = Tape::new();
        let q = tape.constant(random(&[1, 3], &mut rng));
        let k = tape.constant(random(&[1, 3], &mut rng));
        let v = tape.constant(random(&[1, 5], &mut rng));
        let out = scaled_dot_attention(q, k, v).unwrap();
        assert!(out.value().max_abs_diff(&v.value()) < 1e-15);
    }

    #[test]
    fn zero_query_gives_column_mean() {
        let mut rng = stream(2, Stream::Init);
        let tape = Tape::new();
        let q = tape.constant(Tensor::zeros(&[2, 3]));
        let k = tape.constant(random(&[4, 3], &mut rng));
        let v = tape.constant(random(&[4, 2], &mut rng));
        let out = scaled_dot_attention(q, k, v).unwrap();
        let vv = v.value();
        for c in 0..2 {
            let mean = (0..4).map(|r| vv.at(r, c)).sum::<f64>() / 4.0;
            assert!((out.value().at(0, c) - mean).abs() < 1e-12);
            assert!((out.value().at(1, c) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_shape_errors() {
        let tape = Tape::new();
        let q = tape.constant(Tensor::zeros(&[2, 3]));
        let k = tape.constant(Tensor::zeros(&[4, 2]));
        let v = tape.constant(Tensor::zeros(&[4, 2]));
        assert!(scaled_dot_attention(q, k, v).is_err());
        let k = tape.constant(Tensor::zeros(&[4, 3]));
        let v = tape.constant(Tensor::zeros(&[3, 2]));
        assert!(scaled_dot_attention(q, k, v).is_err());
    }

    #[test]
    fn mil_single_frame_and_identical_frames() {
        let mut rng = stream(3, Stream::Init);
        let tape = Tape::new();
        let p = MilParams {
            projection: tape.constant(random(&[4, 3], &mut rng)),
            score: tape.constant(random(&[3, 1], &mut rng)),
        };
        let h = tape.constant(random(&[1, 4], &mut rng));
        let (z, a) = attention_mil_aggregate(h, &p).unwrap();
        assert_eq!(a.value().data(), &[1.0]);
        assert!(z.value().max_abs_diff(&h.value()) < 1e-15);

        let row = random(&[1, 4], &mut rng);
        let rows: Vec<&[f64]> = (0..5).map(|_| row.data()).collect();
        let h = tape.constant(Tensor::from_rows(&rows).unwrap());
        let (z, a) = attention_mil_aggregate(h, &p).unwrap();
        for w in a.value().data() {
            assert!((w - 0.2).abs() < 1e-12);
        }
        assert!(z.value().data().iter().zip(row.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn mil_matches_direct_formula() {
        let mut rng = stream(4, Stream::Init);
        let (n, d, l) = (3, 4, 2);
        let h = random(&[n, d], &mut rng);
        let v = random(&[d, l], &mut rng);
        let w = random(&[l, 1], &mut rng);
        // reference
        let logits: Vec<f64> = (0..n)
            .map(|k| (0..l).map(|j| w.at(j, 0) * (0..d).map(|i| h.at(k, i) * v.at(i, j)).sum::<f64>().tanh()).sum())
            .collect();
        let m = logits.iter().copied().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let a: Vec<f64> = e.iter().map(|x| x / s).collect();
        let z: Vec<f64> = (0..d).map(|i| (0..n).map(|k| a[k] * h.at(k, i)).sum()).collect();

        let tape = Tape::new();
        let p = MilParams {
            projection: tape.constant(v),
            score: tape.constant(w),
        };
        let (zv, av) = attention_mil_aggregate(tape.constant(h), &p).unwrap();
        for (x, y) in av.value().data().iter().zip(&a) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in zv.value().data().iter().zip(&z) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
