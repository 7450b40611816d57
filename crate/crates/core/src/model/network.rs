use crate::autodiff::{Tape, Var};
use crate::data::FeatureSequence;
use crate::rng::{self, Rng, Stream};
use crate::tensor::{softmax_in_place, Tensor};

use super::layers::{attention_mil_aggregate, encoder_layer, positional_encoding, Mode};
use super::params::{Layout, ParamStore};
use super::{Aggregator, ModelConfig, ModelError};

/// Per-frame pooling weights and the prediction for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub video_id: String,
    /// Original frame index of each weighted frame (after stride/cap selection).
    pub frame_indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub predicted_score: u8,
    pub per_class_probabilities: Vec<f64>,
}

/// Output of an inference pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub trace: AttentionTrace,
}

/// Values recorded on a tape by [`Model::forward_on_tape`].
pub struct TapeForward<'t> {
    pub logits: Var<'t>,
    pub frame_weights: Vec<f64>,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Positional encoding, optional transformer stack, pooling, dropout and a
/// dense classifier over pre-extracted frame features.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    params: ParamStore,
}

impl Model {
    /// Randomly initialized model; the draw depends only on `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        use crate::config::Section;
        config.validate()?;
        let mut rng = rng::stream(seed, Stream::Init);
        let (layout, params) = Layout::build(&config, Some(&mut rng));
        Ok(Self { config, layout, params })
    }

    /// Model from stored parameters. Names and shapes must match `config`.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        use crate::config::Section;
        config.validate()?;
        let (layout, template) = Layout::build(&config, None);
        if template.names() != params.names() {
            return Err(ModelError::Parameters(format!(
                "expected {} tensors {:?}..., got {} tensors",
                template.len(),
                template.names().first(),
                params.len()
            )));
        }
        for ((name, t), (_, p)) in template.iter().zip(params.iter()) {
            if t.shape() != p.shape() {
                return Err(ModelError::Parameters(format!(
                    "{name}: expected shape {:?}, got {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Gathers the frames this model consumes. Returns the kept indices and
    /// the `[N', D]` matrix.
    pub fn prepare_features(&self, features: &Tensor) -> Result<(Vec<usize>, Tensor), ModelError> {
        let (n, d) = features.dims2("features")?;
        if d != self.config.feature_dim {
            return Err(ModelError::Dimension {
                expected: self.config.feature_dim,
                actual: d,
            });
        }
        if n == 0 {
            return Err(ModelError::EmptyBag);
        }
        let idx = self.config.select_frames(n);
        if idx.len() == n {
            return Ok((idx, features.clone()));
        }
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in &idx {
            data.extend_from_slice(features.row(i));
        }
        let t = Tensor::matrix(idx.len(), d, data)?;
        Ok((idx, t))
    }

    /// Records the forward pass of already-prepared `[N, D]` features on
    /// `tape`, using `vars` from [`ParamStore::bind`].
    pub fn forward_on_tape<'t>(
        &self,
        tape: &'t Tape,
        vars: &[Var<'t>],
        features: &Tensor,
        mode: &mut Mode<'_>,
    ) -> Result<TapeForward<'t>, ModelError> {
        let cfg = &self.config;
        let (n, d) = features.dims2("features")?;
        if d != cfg.feature_dim {
            return Err(ModelError::Dimension {
                expected: cfg.feature_dim,
                actual: d,
            });
        }
        let mut x = tape.constant(features.clone());
        if cfg.use_positional_encoding {
            x = x.add(tape.constant(positional_encoding(n, d)?))?;
        }
        for enc in &self.layout.encoders {
            x = encoder_layer(x, &enc.bind(vars), cfg.dropout_encoder, mode)?;
        }
        let (pooled, frame_weights) = match cfg.aggregator {
            Aggregator::AttentionMil => {
                let mil = self.layout.mil.as_ref().expect("layout has MIL params").bind(vars);
                let (z, a) = attention_mil_aggregate(x, &mil)?;
                let w = a.value().data().to_vec();
                (z, w)
            }
            Aggregator::Average => (x.mean_rows()?, vec![1.0 / n as f64; n]),
            Aggregator::Max => {
                let (z, argmax) = x.max_rows()?;
                let mut wins = vec![0usize; n];
                argmax.iter().for_each(|&r| wins[r] += 1);
                let top = predict(&wins.iter().map(|&c| c as f64).collect::<Vec<_>>());
                let mut w = vec![0.0; n];
                w[top] = 1.0;
                (z, w)
            }
        };
        let pooled = mode.dropout(pooled, cfg.dropout_head)?;
        let logits = self.layout.head.bind(vars).forward(pooled)?;
        Ok(TapeForward { logits, frame_weights })
    }

    /// Eval-mode inference on one video.
    pub fn predict_video(&self, video: &FeatureSequence) -> Result<Prediction, ModelError> {
        self.forward(video, &mut Mode::Eval)
    }

    pub fn forward(&self, video: &FeatureSequence, mode: &mut Mode<'_>) -> Result<Prediction, ModelError> {
        let (frame_indices, feats) = self.prepare_features(video.features())?;
        let tape = Tape::new();
        let vars = self.params.bind(&tape);
        let out = self.forward_on_tape(&tape, &vars, &feats, mode)?;
        let logits = out.logits.value().data().to_vec();
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        let class = predict(&probs);
        Ok(Prediction {
            trace: AttentionTrace {
                video_id: video.video_id().to_string(),
                frame_indices,
                weights: out.frame_weights,
                predicted_score: self.config.schema.score_of(class),
                per_class_probabilities: probs,
            },
            logits,
        })
    }

    /// Cross-entropy loss of one labeled video and its gradient for every
    /// parameter, in [`ParamStore`] order.
    pub fn loss_and_gradients(
        &self,
        features: &Tensor,
        target: usize,
        class_weights: Option<&[f64]>,
        mode: &mut Mode<'_>,
    ) -> Result<(f64, Vec<Tensor>), ModelError> {
        let (_, feats) = self.prepare_features(features)?;
        let tape = Tape::new();
        let vars = self.params.bind(&tape);
        let out = self.forward_on_tape(&tape, &vars, &feats, mode)?;
        let loss = out.logits.cross_entropy(&[target], class_weights)?;
        let value = loss.item();
        let mut grads = tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(self.params.tensors())
            .map(|(v, p)| grads.take_or_zeros(*v, p.shape()))
            .collect();
        Ok((value, g))
    }

    /// Convenience: a training-mode forward with dropout drawn from `rng`.
    pub fn train_loss_and_gradients(
        &self,
        features: &Tensor,
        target: usize,
        class_weights: Option<&[f64]>,
        rng: &mut Rng,
    ) -> Result<(f64, Vec<Tensor>), ModelError> {
        self.loss_and_gradients(features, target, class_weights, &mut Mode::Train(rng))
    }
}
