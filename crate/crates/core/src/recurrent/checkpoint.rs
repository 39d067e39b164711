//! JSON checkpoint of a trained recurrent model and its vocabulary.
//!
//! ```json
//! {
//!   "format": "userprior-recurrent",
//!   "version": 1,
//!   "config": { ...RecurrentConfig fields... },
//!   "vocab": ["<unk>", "<pad>", ...],
//!   "tensors": {
//!     "embedding":   {"shape": [V, d],  "data": [...]},
//!     "w_input":     {"shape": [d, 4h], "data": [...]},
//!     "w_recurrent": {"shape": [h, 4h], "data": [...]},
//!     "bias":        {"shape": [4h],    "data": [...]},
//!     "w_out":       {"shape": [h, u],  "data": [...]},
//!     "b_out":       {"shape": [u],     "data": [...]}
//!   }
//! }
//! ```
//!
//! Matrices are row-major. Gate blocks inside the `4h` axis are ordered
//! input, forget, cell, output. `u` is 1 for the sigmoid head and
//! `n_classes` for softmax.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Params, RecurrentConfig, RecurrentModel};
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::text::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "userprior-recurrent";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn matrix(m: &Array2<f64>) -> Self {
        Tensor {
            shape: vec![m.nrows(), m.ncols()],
            data: m.iter().copied().collect(),
        }
    }

    fn vector(v: &Array1<f64>) -> Self {
        Tensor {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    fn into_matrix(self, name: &str) -> Result<Array2<f64>> {
        match self.shape.as_slice() {
            &[r, c] => Array2::from_shape_vec((r, c), self.data)
                .map_err(|e| Error::Shape(format!("tensor {name}: {e}"))),
            _ => Err(Error::Shape(format!("tensor {name} is not a matrix"))),
        }
    }

    fn into_vector(self, name: &str) -> Result<Array1<f64>> {
        match self.shape.as_slice() {
            &[n] if n == self.data.len() => Ok(Array1::from(self.data)),
            _ => Err(Error::Shape(format!("tensor {name} is not a vector"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Tensors {
    embedding: Tensor,
    w_input: Tensor,
    w_recurrent: Tensor,
    bias: Tensor,
    w_out: Tensor,
    b_out: Tensor,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: RecurrentConfig,
    vocab: Vec<String>,
    tensors: Tensors,
}

pub fn save_checkpoint(path: &Path, model: &RecurrentModel, vocab: &Vocabulary) -> Result<()> {
    if vocab.len() != model.vocab_size() {
        return Err(Error::Shape(format!(
            "vocabulary of {} tokens for an embedding of {} rows",
            vocab.len(),
            model.vocab_size()
        )));
    }
    let p = &model.params;
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config().clone(),
        vocab: vocab.tokens().to_vec(),
        tensors: Tensors {
            embedding: Tensor::matrix(&p.embedding),
            w_input: Tensor::matrix(&p.w_input),
            w_recurrent: Tensor::matrix(&p.w_recurrent),
            bias: Tensor::vector(&p.bias),
            w_out: Tensor::matrix(&p.w_out),
            b_out: Tensor::vector(&p.b_out),
        },
    };
    write_atomic(path, serde_json::to_string(&ckpt)?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(RecurrentModel, Vocabulary)> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&raw)?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Input(format!(
            "unsupported checkpoint {:?} v{}",
            ckpt.format, ckpt.version
        )));
    }
    let vocab = Vocabulary::from_tokens(ckpt.vocab)?;
    let t = ckpt.tensors;
    let params = Params {
        embedding: t.embedding.into_matrix("embedding")?,
        w_input: t.w_input.into_matrix("w_input")?,
        w_recurrent: t.w_recurrent.into_matrix("w_recurrent")?,
        bias: t.bias.into_vector("bias")?,
        w_out: t.w_out.into_matrix("w_out")?,
        b_out: t.b_out.into_vector("b_out")?,
    };
    if params.embedding.nrows() != vocab.len() {
        return Err(Error::Shape("embedding rows differ from vocabulary size".into()));
    }
    let model = RecurrentModel::from_params(ckpt.config, params)?;
    Ok((model, vocab))
}
