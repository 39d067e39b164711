//! Phase one: an LSTM classifier whose embedding layer is fine-tuned on the
//! training fold and then handed to the feature builder.
//!
//! Architecture: embedding lookup, inverted dropout, a single-layer LSTM
//! (gate blocks ordered input, forget, cell, output), inverted dropout on the
//! final hidden state, and a dense layer feeding a sigmoid (two classes) or
//! softmax (three or more) output. Training minimises mean cross-entropy
//! with Adam over mini-batches, using backpropagation through time.
//!
//! Sequences are front-padded with the padding token (or truncated, keeping
//! the first tokens) to exactly `max_seq_len` steps. The padding row is zero
//! and never updated.

mod adam;
mod checkpoint;
mod gradcheck;
mod lstm;
mod train;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::text::{EmbeddingMatrix, DEFAULT_EMBED_DIM, PAD_INDEX};

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::gradient_check;
pub use train::{train_recurrent, train_recurrent_traced};

/// Range of the uniform initialisation of LSTM and dense weights.
pub const WEIGHT_INIT_RANGE: f64 = 0.08;
pub const FORGET_BIAS_INIT: f64 = 1.0;

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecurrentConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub dropout_embed: f64,
    pub dropout_lstm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub max_seq_len: usize,
    pub n_classes: usize,
    pub seed: u64,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        RecurrentConfig {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: 200,
            dropout_embed: 0.25,
            dropout_lstm: 0.5,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            max_seq_len: 40,
            n_classes: 2,
            seed: 0,
        }
    }
}

impl RecurrentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.max_seq_len == 0 {
            return bad("embed_dim, hidden_dim and max_seq_len must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, p) in [
            ("dropout_embed", self.dropout_embed),
            ("dropout_lstm", self.dropout_lstm),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if !(self.learning_rate > 0.0 && self.eps_adam > 0.0) {
            return bad("learning_rate and eps_adam must be positive".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }

    pub fn head(&self) -> Head {
        if self.n_classes == 2 {
            Head::Sigmoid
        } else {
            Head::Softmax
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One output unit: the probability of class 1.
    Sigmoid,
    Softmax,
}

impl Head {
    pub fn output_units(self, n_classes: usize) -> usize {
        match self {
            Head::Sigmoid => 1,
            Head::Softmax => n_classes,
        }
    }
}

/// All trainable tensors. Gradients and Adam moments reuse this layout.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    /// `|V| x d`
    pub embedding: Array2<f64>,
    /// `d x 4h`, gate blocks `[input | forget | cell | output]`
    pub w_input: Array2<f64>,
    /// `h x 4h`
    pub w_recurrent: Array2<f64>,
    /// `4h`
    pub bias: Array1<f64>,
    /// `h x units`
    pub w_out: Array2<f64>,
    /// `units`
    pub b_out: Array1<f64>,
}

impl Params {
    pub fn zeros_like(other: &Params) -> Params {
        Params {
            embedding: Array2::zeros(other.embedding.raw_dim()),
            w_input: Array2::zeros(other.w_input.raw_dim()),
            w_recurrent: Array2::zeros(other.w_recurrent.raw_dim()),
            bias: Array1::zeros(other.bias.raw_dim()),
            w_out: Array2::zeros(other.w_out.raw_dim()),
            b_out: Array1::zeros(other.b_out.raw_dim()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.embedding.iter().all(|v| v.is_finite())
            && self.w_input.iter().all(|v| v.is_finite())
            && self.w_recurrent.iter().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite())
            && self.w_out.iter().all(|v| v.is_finite())
            && self.b_out.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    config: RecurrentConfig,
    pub(crate) params: Params,
}

impl RecurrentModel {
    /// Seeded initial model around `init_emb`.
    pub fn new(config: RecurrentConfig, init_emb: &EmbeddingMatrix) -> Result<Self> {
        config.validate()?;
        if init_emb.dim() != config.embed_dim {
            return Err(Error::Shape(format!(
                "embedding dimension {} does not match embed_dim {}",
                init_emb.dim(),
                config.embed_dim
            )));
        }
        if init_emb.rows() <= PAD_INDEX {
            return Err(Error::Shape("embedding table lacks the special rows".into()));
        }
        let mut rng = Rng::new(derive_seed(config.seed, INIT_STREAM));
        let (d, h) = (config.embed_dim, config.hidden_dim);
        let units = config.head().output_units(config.n_classes);
        let mut uniform = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || {
                rng.uniform(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE)
            })
        };
        let w_input = uniform(d, 4 * h);
        let w_recurrent = uniform(h, 4 * h);
        let w_out = uniform(h, units);
        let mut bias = Array1::zeros(4 * h);
        bias.slice_mut(ndarray::s![h..2 * h]).fill(FORGET_BIAS_INIT);
        let mut embedding = init_emb.values().clone();
        embedding.row_mut(PAD_INDEX).fill(0.0);
        Ok(RecurrentModel {
            config,
            params: Params {
                embedding,
                w_input,
                w_recurrent,
                bias,
                w_out,
                b_out: Array1::zeros(units),
            },
        })
    }

    pub(crate) fn from_params(config: RecurrentConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.embed_dim, config.hidden_dim);
        let units = config.head().output_units(config.n_classes);
        let ok = params.embedding.ncols() == d
            && params.embedding.nrows() > PAD_INDEX
            && params.w_input.dim() == (d, 4 * h)
            && params.w_recurrent.dim() == (h, 4 * h)
            && params.bias.len() == 4 * h
            && params.w_out.dim() == (h, units)
            && params.b_out.len() == units;
        if !ok {
            return Err(Error::Shape("parameter shapes do not match the config".into()));
        }
        if !params.all_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(RecurrentModel { config, params })
    }

    pub fn config(&self) -> &RecurrentConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.params.embedding.nrows()
    }

    /// Overwrites the dense output layer; used to pin hand-built models.
    pub fn set_output_layer(&mut self, w_out: Array2<f64>, b_out: Array1<f64>) -> Result<()> {
        if w_out.dim() != self.params.w_out.dim() || b_out.len() != self.params.b_out.len() {
            return Err(Error::Shape("output layer shape mismatch".into()));
        }
        self.params.w_out = w_out;
        self.params.b_out = b_out;
        Ok(())
    }

    /// Overwrites the LSTM weights (`d x 4h`, `h x 4h`, `4h`).
    pub fn set_lstm_weights(
        &mut self,
        w_input: Array2<f64>,
        w_recurrent: Array2<f64>,
        bias: Array1<f64>,
    ) -> Result<()> {
        if w_input.dim() != self.params.w_input.dim()
            || w_recurrent.dim() != self.params.w_recurrent.dim()
            || bias.len() != self.params.bias.len()
        {
            return Err(Error::Shape("LSTM weight shape mismatch".into()));
        }
        self.params.w_input = w_input;
        self.params.w_recurrent = w_recurrent;
        self.params.bias = bias;
        Ok(())
    }
}

/// Class probabilities for one token sequence. With `train_mode`, dropout
/// masks are drawn from `rng`.
pub fn forward(
    model: &RecurrentModel,
    token_indices: &[usize],
    train_mode: bool,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let idx = lstm::encode_batch(&[token_indices], model.config.max_seq_len, model.vocab_size())?;
    let dropout = train_mode.then_some(rng);
    let (logits, _) = lstm::forward_batch(&model.params, &model.config, &idx, dropout)?;
    let probs = lstm::probabilities(model.config.head(), &logits);
    Ok(probs.row(0).to_vec())
}

/// Inference-mode class probabilities for many sequences.
pub fn predict_proba(model: &RecurrentModel, sequences: &[Vec<usize>]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((sequences.len(), model.config.n_classes));
    let bs = model.config.batch_size.max(1);
    for (chunk_i, chunk) in sequences.chunks(bs).enumerate() {
        let refs: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
        let idx = lstm::encode_batch(&refs, model.config.max_seq_len, model.vocab_size())?;
        let (logits, _) = lstm::forward_batch(&model.params, &model.config, &idx, None)?;
        let probs = lstm::probabilities(model.config.head(), &logits);
        out.slice_mut(ndarray::s![chunk_i * bs..chunk_i * bs + chunk.len(), ..])
            .assign(&probs);
    }
    Ok(out)
}

/// Copy of the (fine-tuned) embedding layer.
pub fn extract_embeddings(model: &RecurrentModel) -> EmbeddingMatrix {
    EmbeddingMatrix::from_array(model.params.embedding.clone())
        .expect("model parameters are finite")
}
