//! Reverse-mode differentiation over a Wengert tape.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Calling
//! [`Tape::backward`] on a scalar walks the record in reverse and returns the
//! gradient of that scalar with respect to every variable that requires one.
//! Only the operations the sequence model needs are provided.

use std::cell::{Ref, RefCell};

use rand::Rng as _;

use crate::rng::Rng;
use crate::tensor::{gemm, gemm_at, gemm_bt, softmax_in_place, transpose, Tensor, TensorError};

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    MatMulBt(usize, usize),
    Transpose(usize),
    Relu(usize),
    Tanh(usize),
    Softmax(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout {
        x: usize,
        mask: Vec<f64>,
    },
    ConcatCols(Vec<usize>),
    MeanRows(usize),
    MaxRows {
        x: usize,
        argmax: Vec<usize>,
    },
    Sum(usize),
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        scale: Vec<f64>,
        probs: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Operation record for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

/// Gradients produced by [`Tape::backward`], indexed by variable.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, or zeros of `shape` when it did not influence the loss.
    pub fn take_or_zeros(&mut self, var: Var<'_>, shape: &[usize]) -> Tensor {
        self.grads
            .get_mut(var.id)
            .and_then(|g| g.take())
            .unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var<'_>) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[var.id].value)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn record(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'_> {
        let rg = self.needs(inputs);
        self.push(value, op, rg)
    }

    /// Gradient of the scalar `loss` with respect to every recorded variable.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return Err(TensorError::InvalidArgument(format!(
                "backward: loss must be a scalar, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], id: usize, g: &[f64]) {
            match &mut grads[id] {
                Some(existing) => existing.iter_mut().zip(g).for_each(|(e, v)| *e += v),
                slot @ None => *slot = Some(g.to_vec()),
            }
        }

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *b, &g);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(val(*b).data()).map(|(g, b)| g * b).collect();
                    let gb: Vec<f64> = g.iter().zip(val(*a).data()).map(|(g, a)| g * a).collect();
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::AddRow(x, b) => {
                    acc(&mut grads, *x, &g);
                    let d = val(*b).len();
                    let mut gb = vec![0.0; d];
                    for row in g.chunks_exact(d) {
                        gb.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                    }
                    acc(&mut grads, *b, &gb);
                }
                Op::Scale(x, c) => {
                    let gx: Vec<f64> = g.iter().map(|v| v * c).collect();
                    acc(&mut grads, *x, &gx);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                    let n = val(*b).shape()[1];
                    if nodes[*a].requires_grad {
                        let ga = gemm_bt(&g, val(*b).data(), m, n, k);
                        acc(&mut grads, *a, &ga);
                    }
                    if nodes[*b].requires_grad {
                        let gb = gemm_at(val(*a).data(), &g, m, k, n);
                        acc(&mut grads, *b, &gb);
                    }
                }
                Op::MatMulBt(a, b) => {
                    // c[m×n] = a[m×k] · b[n×k]ᵀ
                    let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                    let n = val(*b).shape()[0];
                    if nodes[*a].requires_grad {
                        let ga = gemm(&g, val(*b).data(), m, n, k);
                        acc(&mut grads, *a, &ga);
                    }
                    if nodes[*b].requires_grad {
                        let gb = gemm_at(&g, val(*a).data(), m, n, k);
                        acc(&mut grads, *b, &gb);
                    }
                }
                Op::Transpose(x) => {
                    let (r, c) = (val(*x).shape()[0], val(*x).shape()[1]);
                    acc(&mut grads, *x, &transpose(&g, c, r));
                }
                Op::Relu(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(val(*x).data())
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc(&mut grads, *x, &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    acc(&mut grads, *x, &gx);
                }
                Op::Softmax(x) => {
                    let n = node.value.last_dim();
                    let mut gx = vec![0.0; g.len()];
                    for ((gr, yr), out) in g
                        .chunks_exact(n)
                        .zip(node.value.data().chunks_exact(n))
                        .zip(gx.chunks_exact_mut(n))
                    {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            out[j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut grads, *x, &gx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let d = val(*gain).len();
                    let gamma = val(*gain).data();
                    let mut ggain = vec![0.0; d];
                    let mut gbias = vec![0.0; d];
                    let mut gx = vec![0.0; g.len()];
                    for (r, ((gr, xr), out)) in g
                        .chunks_exact(d)
                        .zip(xhat.chunks_exact(d))
                        .zip(gx.chunks_exact_mut(d))
                        .enumerate()
                    {
                        let mut sum_dx = 0.0;
                        let mut sum_dx_xhat = 0.0;
                        for j in 0..d {
                            ggain[j] += gr[j] * xr[j];
                            gbias[j] += gr[j];
                            let dxh = gr[j] * gamma[j];
                            sum_dx += dxh;
                            sum_dx_xhat += dxh * xr[j];
                        }
                        let df = d as f64;
                        for j in 0..d {
                            let dxh = gr[j] * gamma[j];
                            out[j] = inv_std[r] / df * (df * dxh - sum_dx - xr[j] * sum_dx_xhat);
                        }
                    }
                    acc(&mut grads, *x, &gx);
                    acc(&mut grads, *gain, &ggain);
                    acc(&mut grads, *bias, &gbias);
                }
                Op::Dropout { x, mask } => {
                    let gx: Vec<f64> = g.iter().zip(mask).map(|(g, m)| g * m).collect();
                    acc(&mut grads, *x, &gx);
                }
                Op::ConcatCols(parts) => {
                    let total = node.value.last_dim();
                    let rows = node.value.shape()[0];
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).last_dim();
                        if nodes[p].requires_grad {
                            let mut gp = Vec::with_capacity(rows * w);
                            for r in 0..rows {
                                gp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                            }
                            acc(&mut grads, p, &gp);
                        }
                        offset += w;
                    }
                }
                Op::MeanRows(x) => {
                    let rows = val(*x).shape()[0];
                    let scale = 1.0 / rows as f64;
                    let gx: Vec<f64> = (0..rows).flat_map(|_| g.iter().map(|v| v * scale)).collect();
                    acc(&mut grads, *x, &gx);
                }
                Op::MaxRows { x, argmax } => {
                    let d = g.len();
                    let mut gx = vec![0.0; val(*x).len()];
                    for (c, &r) in argmax.iter().enumerate() {
                        gx[r * d + c] += g[c];
                    }
                    acc(&mut grads, *x, &gx);
                }
                Op::Sum(x) => {
                    let gx = vec![g[0]; val(*x).len()];
                    acc(&mut grads, *x, &gx);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    scale,
                    probs,
                } => {
                    let c = val(*logits).last_dim();
                    let mut gx = probs.clone();
                    for (b, &t) in targets.iter().enumerate() {
                        gx[b * c + t] -= 1.0;
                        for v in &mut gx[b * c..(b + 1) * c] {
                            *v *= scale[b] * g[0];
                        }
                    }
                    acc(&mut grads, *logits, &gx);
                }
            }
        }
        let out = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| match (g, &nodes[i].op) {
                (Some(g), Op::Leaf) if nodes[i].requires_grad => Some(Tensor::new(nodes[i].value.shape().to_vec(), g).expect("grad shape")),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: out })
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        self.tape.value(*self)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// Scalar value of a one-element variable.
    pub fn item(&self) -> f64 {
        self.value().data()[0]
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.shape() != b.shape() {
                return Err(mismatch("add", &a, &b));
            }
            let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
            Tensor::new(a.shape().to_vec(), data)?
        };
        Ok(self.tape.record(out, Op::Add(self.id, other.id), &[self.id, other.id]))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.shape() != b.shape() {
                return Err(mismatch("mul", &a, &b));
            }
            let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
            Tensor::new(a.shape().to_vec(), data)?
        };
        Ok(self.tape.record(out, Op::Mul(self.id, other.id), &[self.id, other.id]))
    }

    /// Adds a length-`d` bias to every row of a `[.., d]` tensor.
    pub fn add_row(self, bias: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = {
            let (x, b) = (self.value(), bias.value());
            let d = x.last_dim();
            if b.len() != d {
                return Err(mismatch("add_row", &x, &b));
            }
            let mut data = x.data().to_vec();
            for row in data.chunks_exact_mut(d) {
                row.iter_mut().zip(b.data()).for_each(|(v, c)| *v += c);
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        Ok(self.tape.record(out, Op::AddRow(self.id, bias.id), &[self.id, bias.id]))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let out = self.value().map(|v| v * c);
        self.tape.record(out, Op::Scale(self.id, c), &[self.id])
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = self.value().matmul(&other.value())?;
        Ok(self.tape.record(out, Op::MatMul(self.id, other.id), &[self.id, other.id]))
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = {
            let (a, b) = (self.value(), other.value());
            let (m, k) = a.dims2("matmul_t")?;
            let (n, k2) = b.dims2("matmul_t")?;
            if k != k2 {
                return Err(mismatch("matmul_t", &a, &b));
            }
            Tensor::matrix(m, n, gemm_bt(a.data(), b.data(), m, k, n))?
        };
        Ok(self.tape.record(out, Op::MatMulBt(self.id, other.id), &[self.id, other.id]))
    }

    pub fn transpose(self) -> Result<Var<'t>, TensorError> {
        let out = self.value().transpose()?;
        Ok(self.tape.record(out, Op::Transpose(self.id), &[self.id]))
    }

    pub fn relu(self) -> Var<'t> {
        let out = self.value().map(|v| v.max(0.0));
        self.tape.record(out, Op::Relu(self.id), &[self.id])
    }

    pub fn tanh(self) -> Var<'t> {
        let out = self.value().map(f64::tanh);
        self.tape.record(out, Op::Tanh(self.id), &[self.id])
    }

    /// Softmax along the last axis.
    pub fn softmax(self) -> Var<'t> {
        let out = {
            let x = self.value();
            let n = x.last_dim();
            let mut data = x.data().to_vec();
            data.chunks_exact_mut(n).for_each(softmax_in_place);
            Tensor::new(x.shape().to_vec(), data).expect("same shape")
        };
        self.tape.record(out, Op::Softmax(self.id), &[self.id])
    }

    /// Normalizes each row over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(self, gain: Var<'t>, bias: Var<'t>, eps: f64) -> Result<Var<'t>, TensorError> {
        if !(eps > 0.0) {
            return Err(TensorError::InvalidArgument(format!("layer_norm: eps must be > 0, got {eps}")));
        }
        let (out, xhat, inv_std) = {
            let (x, g, b) = (self.value(), gain.value(), bias.value());
            let d = x.last_dim();
            if g.len() != d || b.len() != d {
                return Err(mismatch("layer_norm", &x, &g));
            }
            let rows = x.len() / d;
            let mut xhat = Vec::with_capacity(x.len());
            let mut inv_std = Vec::with_capacity(rows);
            let mut out = Vec::with_capacity(x.len());
            for row in x.data().chunks_exact(d) {
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std.push(is);
                for j in 0..d {
                    let h = (row[j] - mean) * is;
                    xhat.push(h);
                    out.push(h * g.data()[j] + b.data()[j]);
                }
            }
            (Tensor::new(x.shape().to_vec(), out)?, xhat, inv_std)
        };
        let op = Op::LayerNorm {
            x: self.id,
            gain: gain.id,
            bias: bias.id,
            xhat,
            inv_std,
        };
        Ok(self.tape.record(out, op, &[self.id, gain.id, bias.id]))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`. Identity
    /// otherwise.
    pub fn dropout(self, rate: f64, training: bool, rng: &mut Rng) -> Result<Var<'t>, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidArgument(format!(
                "dropout: rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(self);
        }
        let keep = 1.0 / (1.0 - rate);
        let (out, mask) = {
            let x = self.value();
            let mask: Vec<f64> = (0..x.len())
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect();
            let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
            (Tensor::new(x.shape().to_vec(), data)?, mask)
        };
        Ok(self.tape.record(out, Op::Dropout { x: self.id, mask }, &[self.id]))
    }

    /// Concatenates rank-2 variables along columns.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>, TensorError> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::InvalidArgument("concat_cols: no inputs".into()))?;
        let tape = first.tape;
        let out = {
            let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let rows = vals[0].dims2("concat_cols")?.0;
            for v in &vals {
                if v.dims2("concat_cols")?.0 != rows {
                    return Err(mismatch("concat_cols", &vals[0], v));
                }
            }
            let total: usize = vals.iter().map(|v| v.last_dim()).sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for v in &vals {
                    data.extend_from_slice(v.row(r));
                }
            }
            Tensor::matrix(rows, total, data)?
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(tape.record(out, Op::ConcatCols(ids.clone()), &ids))
    }

    /// Column means of a rank-2 variable, as `[1, d]`.
    pub fn mean_rows(self) -> Result<Var<'t>, TensorError> {
        let out = {
            let x = self.value();
            let (n, d) = x.dims2("mean_rows")?;
            let mut data = vec![0.0; d];
            for row in x.data().chunks_exact(d) {
                data.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            data.iter_mut().for_each(|s| *s /= n as f64);
            Tensor::matrix(1, d, data)?
        };
        Ok(self.tape.record(out, Op::MeanRows(self.id), &[self.id]))
    }

    /// Column maxima of a rank-2 variable, as `[1, d]`, plus the winning row
    /// for each column (lowest index on ties).
    pub fn max_rows(self) -> Result<(Var<'t>, Vec<usize>), TensorError> {
        let (out, argmax) = {
            let x = self.value();
            let (_, d) = x.dims2("max_rows")?;
            let mut best = x.row(0).to_vec();
            let mut argmax = vec![0usize; d];
            for (r, row) in x.data().chunks_exact(d).enumerate().skip(1) {
                for j in 0..d {
                    if row[j] > best[j] {
                        best[j] = row[j];
                        argmax[j] = r;
                    }
                }
            }
            (Tensor::matrix(1, d, best)?, argmax)
        };
        let var = self.tape.record(
            out,
            Op::MaxRows {
                x: self.id,
                argmax: argmax.clone(),
            },
            &[self.id],
        );
        Ok((var, argmax))
    }

    pub fn sum(self) -> Var<'t> {
        let out = Tensor::scalar(self.value().data().iter().sum());
        self.tape.record(out, Op::Sum(self.id), &[self.id])
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `[B, C]` logits. With `class_weights`, each row is scaled by the weight
    /// of its target and the sum is normalized by the total weight.
    pub fn cross_entropy(self, targets: &[usize], class_weights: Option<&[f64]>) -> Result<Var<'t>, TensorError> {
        let (loss, scale, probs) = {
            let x = self.value();
            let (b, c) = x.dims2("cross_entropy")?;
            if targets.len() != b {
                return Err(TensorError::InvalidArgument(format!(
                    "cross_entropy: {} targets for {b} rows",
                    targets.len()
                )));
            }
            if let Some(&t) = targets.iter().find(|&&t| t >= c) {
                return Err(TensorError::InvalidArgument(format!(
                    "cross_entropy: target {t} out of range for {c} classes"
                )));
            }
            if let Some(w) = class_weights {
                if w.len() != c {
                    return Err(TensorError::InvalidArgument(format!(
                        "cross_entropy: {} class weights for {c} classes",
                        w.len()
                    )));
                }
            }
            let raw: Vec<f64> = targets
                .iter()
                .map(|&t| class_weights.map_or(1.0, |w| w[t]))
                .collect();
            let norm: f64 = raw.iter().sum();
            if !(norm > 0.0) {
                return Err(TensorError::InvalidArgument(
                    "cross_entropy: total target weight must be positive".into(),
                ));
            }
            let scale: Vec<f64> = raw.iter().map(|w| w / norm).collect();
            let mut probs = Vec::with_capacity(b * c);
            let mut loss = 0.0;
            for (r, row) in x.data().chunks_exact(c).enumerate() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                loss += scale[r] * (lse - row[targets[r]]);
                probs.extend(row.iter().map(|v| (v - lse).exp()));
            }
            (loss, scale, probs)
        };
        let op = Op::CrossEntropy {
            logits: self.id,
            targets: targets.to_vec(),
            scale,
            probs,
        };
        Ok(self.tape.record(Tensor::scalar(loss), op, &[self.id]))
    }
}
