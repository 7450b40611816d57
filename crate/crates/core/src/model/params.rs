//! Named parameter storage and the index layout of the sequence model.

use rand::Rng as _;

use crate::autodiff::{Tape, Var};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::layers::{EncoderParams, HeadParams, Linear, MhaParams, MilParams, Norm};
use super::ModelConfig;

/// Ordered, named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub(crate) fn push(&mut self, name: String, tensor: Tensor) -> usize {
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    /// Registers every tensor on `tape` as a trainable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LinearIdx {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NormIdx {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct EncoderIdx {
    pub heads: Vec<[LinearIdx; 3]>,
    pub out: LinearIdx,
    pub norm1: NormIdx,
    pub ff1: LinearIdx,
    pub ff2: LinearIdx,
    pub norm2: NormIdx,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MilIdx {
    pub proj: usize,
    pub score: usize,
}

/// Where each named parameter of a [`ModelConfig`] lives in its [`ParamStore`].
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub encoders: Vec<EncoderIdx>,
    pub mil: Option<MilIdx>,
    pub head: LinearIdx,
}

enum Init {
    Glorot,
    Zeros,
    Ones,
}

struct Builder<'r> {
    store: ParamStore,
    rng: Option<&'r mut Rng>,
}

impl Builder<'_> {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        let mut t = Tensor::zeros(shape);
        match (init, self.rng.as_deref_mut()) {
            (Init::Glorot, Some(rng)) => {
                let fan_in = shape[0];
                let fan_out = shape[shape.len() - 1];
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-a..a));
            }
            (Init::Ones, _) => t.data_mut().iter_mut().for_each(|v| *v = 1.0),
            _ => {}
        }
        self.store.push(name, t)
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> LinearIdx {
        LinearIdx {
            w: self.add(format!("{prefix}.weight"), &[fan_in, fan_out], Init::Glorot),
            b: self.add(format!("{prefix}.bias"), &[fan_out], Init::Zeros),
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> NormIdx {
        NormIdx {
            gain: self.add(format!("{prefix}.gain"), &[d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), &[d], Init::Zeros),
        }
    }
}

impl Layout {
    /// Builds the layout and a parameter store. With `rng`, weight matrices are
    /// Glorot-uniform initialized; otherwise they are zero. The MIL score
    /// vector and the head always start at zero, so attention starts uniform.
    pub fn build(cfg: &ModelConfig, rng: Option<&mut Rng>) -> (Layout, ParamStore) {
        let d = cfg.feature_dim;
        let dk = cfg.head_dim();
        let mut b = Builder {
            store: ParamStore::default(),
            rng,
        };
        let mut encoders = Vec::new();
        if cfg.use_transformer {
            for l in 0..cfg.num_layers {
                let p = format!("encoder.{l}");
                let heads = (0..cfg.num_heads)
                    .map(|h| {
                        [
                            b.linear(&format!("{p}.attn.head.{h}.query"), d, dk),
                            b.linear(&format!("{p}.attn.head.{h}.key"), d, dk),
                            b.linear(&format!("{p}.attn.head.{h}.value"), d, dk),
                        ]
                    })
                    .collect();
                let out = b.linear(&format!("{p}.attn.out"), d, d);
                let norm1 = b.norm(&format!("{p}.norm1"), d);
                let ff1 = b.linear(&format!("{p}.ffn.in"), d, cfg.ffn_hidden);
                let ff2 = b.linear(&format!("{p}.ffn.out"), cfg.ffn_hidden, d);
                let norm2 = b.norm(&format!("{p}.norm2"), d);
                encoders.push(EncoderIdx {
                    heads,
                    out,
                    norm1,
                    ff1,
                    ff2,
                    norm2,
                });
            }
        }
        let mil = (cfg.aggregator == super::Aggregator::AttentionMil).then(|| MilIdx {
            proj: b.add("mil.projection".into(), &[d, cfg.mil_hidden], Init::Glorot),
            score: b.add("mil.score".into(), &[cfg.mil_hidden, 1], Init::Zeros),
        });
        let head = LinearIdx {
            w: b.add("head.weight".into(), &[d, cfg.num_classes()], Init::Zeros),
            b: b.add("head.bias".into(), &[cfg.num_classes()], Init::Zeros),
        };
        (Layout { encoders, mil, head }, b.store)
    }
}

fn linear<'t>(vars: &[Var<'t>], i: LinearIdx) -> Linear<'t> {
    Linear {
        weight: vars[i.w],
        bias: vars[i.b],
    }
}

fn norm<'t>(vars: &[Var<'t>], i: NormIdx) -> Norm<'t> {
    Norm {
        gain: vars[i.gain],
        bias: vars[i.bias],
    }
}

impl EncoderIdx {
    pub fn bind<'t>(&self, vars: &[Var<'t>]) -> EncoderParams<'t> {
        EncoderParams {
            attention: MhaParams {
                heads: self
                    .heads
                    .iter()
                    .map(|[q, k, v]| HeadParams {
                        query: linear(vars, *q),
                        key: linear(vars, *k),
                        value: linear(vars, *v),
                    })
                    .collect(),
                out: linear(vars, self.out),
            },
            norm1: norm(vars, self.norm1),
            ffn_in: linear(vars, self.ff1),
            ffn_out: linear(vars, self.ff2),
            norm2: norm(vars, self.norm2),
        }
    }
}

impl MilIdx {
    pub fn bind<'t>(&self, vars: &[Var<'t>]) -> MilParams<'t> {
        MilParams {
            projection: vars[self.proj],
            score: vars[self.score],
        }
    }
}

impl LinearIdx {
    pub fn bind<'t>(&self, vars: &[Var<'t>]) -> Linear<'t> {
        linear(vars, *self)
    }
}
