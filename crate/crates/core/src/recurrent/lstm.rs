//! Batched LSTM forward pass, loss and backpropagation through time.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{Head, Params, RecurrentConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::text::PAD_INDEX;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `B x max_len` index matrix, front-padded; longer sequences keep their
/// first `max_len` tokens.
pub(crate) fn encode_batch(
    sequences: &[&[usize]],
    max_len: usize,
    vocab_size: usize,
) -> Result<Array2<usize>> {
    let mut idx = Array2::from_elem((sequences.len(), max_len), PAD_INDEX);
    for (r, seq) in sequences.iter().enumerate() {
        let kept = &seq[..seq.len().min(max_len)];
        if let Some(&bad) = kept.iter().find(|&&t| t >= vocab_size) {
            return Err(Error::Input(format!(
                "token index {bad} outside vocabulary of size {vocab_size}"
            )));
        }
        let offset = max_len - kept.len();
        for (j, &tok) in kept.iter().enumerate() {
            idx[[r, offset + j]] = tok;
        }
    }
    Ok(idx)
}

pub(crate) fn dropout_mask(rng: &mut Rng, rows: usize, cols: usize, rate: f64) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.bernoulli(keep) {
            scale
        } else {
            0.0
        }
    })
}

/// Everything the backward pass needs from a forward pass.
pub(crate) struct Tape {
    idx: Array2<usize>,
    /// Embedded inputs after dropout, one `B x d` per step.
    inputs: Vec<Array2<f64>>,
    embed_masks: Vec<Array2<f64>>,
    /// Activated gates `[i | f | g | o]`, `B x 4h` per step.
    gates: Vec<Array2<f64>>,
    /// `c_0 .. c_T`
    cells: Vec<Array2<f64>>,
    /// `h_0 .. h_T`
    hidden: Vec<Array2<f64>>,
    out_mask: Option<Array2<f64>>,
    /// Final hidden state after dropout, input of the dense layer.
    features: Array2<f64>,
}

/// Runs the network over an encoded batch. With `dropout`, inverted dropout
/// masks are drawn from the generator in a fixed order: one `B x d` mask per
/// step, then one `B x h` mask for the final state.
pub(crate) fn forward_batch(
    params: &Params,
    config: &RecurrentConfig,
    idx: &Array2<usize>,
    mut dropout: Option<&mut Rng>,
) -> Result<(Array2<f64>, Tape)> {
    let (b, steps) = idx.dim();
    let d = params.embedding.ncols();
    let h = params.w_recurrent.nrows();

    let mut tape = Tape {
        idx: idx.clone(),
        inputs: Vec::with_capacity(steps),
        embed_masks: Vec::new(),
        gates: Vec::with_capacity(steps),
        cells: Vec::with_capacity(steps + 1),
        hidden: Vec::with_capacity(steps + 1),
        out_mask: None,
        features: Array2::zeros((0, 0)),
    };
    tape.cells.push(Array2::zeros((b, h)));
    tape.hidden.push(Array2::zeros((b, h)));

    for t in 0..steps {
        let mut x = Array2::zeros((b, d));
        for r in 0..b {
            x.row_mut(r).assign(&params.embedding.row(idx[[r, t]]));
        }
        if let Some(rng) = dropout.as_deref_mut() {
            if config.dropout_embed > 0.0 {
                let mask = dropout_mask(rng, b, d, config.dropout_embed);
                x *= &mask;
                tape.embed_masks.push(mask);
            }
        }

        let mut z = Array2::zeros((b, 4 * h));
        z += &params.bias;
        general_mat_mul(1.0, &x, &params.w_input, 1.0, &mut z);
        general_mat_mul(1.0, &tape.hidden[t], &params.w_recurrent, 1.0, &mut z);
        for mut row in z.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if (2 * h..3 * h).contains(&j) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
        }

        let c_prev = &tape.cells[t];
        let mut c = Array2::zeros((b, h));
        let mut hid = Array2::zeros((b, h));
        for r in 0..b {
            let g_row = z.row(r);
            for k in 0..h {
                let (i, f, g, o) = (g_row[k], g_row[h + k], g_row[2 * h + k], g_row[3 * h + k]);
                let ct = f * c_prev[[r, k]] + i * g;
                c[[r, k]] = ct;
                hid[[r, k]] = o * ct.tanh();
            }
        }
        tape.inputs.push(x);
        tape.gates.push(z);
        tape.cells.push(c);
        tape.hidden.push(hid);
    }

    let mut features = tape.hidden[steps].clone();
    if let Some(rng) = dropout.as_deref_mut() {
        if config.dropout_lstm > 0.0 {
            let mask = dropout_mask(rng, b, h, config.dropout_lstm);
            features *= &mask;
            tape.out_mask = Some(mask);
        }
    }
    let mut logits = Array2::zeros((b, params.b_out.len()));
    logits += &params.b_out;
    general_mat_mul(1.0, &features, &params.w_out, 1.0, &mut logits);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits in forward pass".into()));
    }
    tape.features = features;
    Ok((logits, tape))
}

/// Class probabilities (`B x n_classes`) from logits.
pub(crate) fn probabilities(head: Head, logits: &Array2<f64>) -> Array2<f64> {
    match head {
        Head::Sigmoid => {
            let mut out = Array2::zeros((logits.nrows(), 2));
            for (r, l) in logits.column(0).iter().enumerate() {
                let p = sigmoid(*l);
                out[[r, 0]] = 1.0 - p;
                out[[r, 1]] = p;
            }
            out
        }
        Head::Softmax => {
            let mut out = logits.clone();
            for mut row in out.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row /= sum;
            }
            out
        }
    }
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub(crate) fn loss_and_grad(
    head: Head,
    logits: &Array2<f64>,
    labels: &[usize],
) -> (f64, Array2<f64>) {
    let b = logits.nrows();
    let scale = 1.0 / b as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    match head {
        Head::Sigmoid => {
            for r in 0..b {
                let s = logits[[r, 0]];
                let y = labels[r] as f64;
                total += softplus(s) - y * s;
                grad[[r, 0]] = (sigmoid(s) - y) * scale;
            }
        }
        Head::Softmax => {
            for r in 0..b {
                let row = logits.row(r);
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[labels[r]];
                for (k, v) in row.iter().enumerate() {
                    let p = (v - lse).exp();
                    let y = if k == labels[r] { 1.0 } else { 0.0 };
                    grad[[r, k]] = (p - y) * scale;
                }
            }
        }
    }
    (total * scale, grad)
}

/// Gradient buffers, with the embedding rows that received gradient.
pub(crate) struct Grads {
    pub params: Params,
    pub touched_rows: Vec<usize>,
    touched: Vec<bool>,
}

impl Grads {
    pub fn new(like: &Params) -> Self {
        Grads {
            params: Params::zeros_like(like),
            touched_rows: Vec::new(),
            touched: vec![false; like.embedding.nrows()],
        }
    }

    pub fn clear(&mut self) {
        for &r in &self.touched_rows {
            self.params.embedding.row_mut(r).fill(0.0);
            self.touched[r] = false;
        }
        self.touched_rows.clear();
        self.params.w_input.fill(0.0);
        self.params.w_recurrent.fill(0.0);
        self.params.bias.fill(0.0);
        self.params.w_out.fill(0.0);
        self.params.b_out.fill(0.0);
    }
}

fn add_column_sums(target: &mut Array1<f64>, m: &Array2<f64>) {
    *target += &m.sum_axis(Axis(0));
}

/// Accumulates parameter gradients for `dlogits` into `grads`.
pub(crate) fn backward(params: &Params, tape: &Tape, dlogits: &Array2<f64>, grads: &mut Grads) {
    let b = dlogits.nrows();
    let h = params.w_recurrent.nrows();
    let steps = tape.inputs.len();
    let g = &mut grads.params;

    general_mat_mul(1.0, &tape.features.t(), dlogits, 1.0, &mut g.w_out);
    add_column_sums(&mut g.b_out, dlogits);

    let mut dh = dlogits.dot(&params.w_out.t());
    if let Some(mask) = &tape.out_mask {
        dh *= mask;
    }
    let mut dc: Array2<f64> = Array2::zeros((b, h));
    let mut dz = Array2::zeros((b, 4 * h));
    let w_input_t: ArrayView2<f64> = params.w_input.t();
    let w_rec_t: ArrayView2<f64> = params.w_recurrent.t();

    for t in (0..steps).rev() {
        let gates = &tape.gates[t];
        let c = &tape.cells[t + 1];
        let c_prev = &tape.cells[t];
        for r in 0..b {
            for k in 0..h {
                let (i, f, gg, o) = (
                    gates[[r, k]],
                    gates[[r, h + k]],
                    gates[[r, 2 * h + k]],
                    gates[[r, 3 * h + k]],
                );
                let tc = c[[r, k]].tanh();
                let dh_rk = dh[[r, k]];
                let dc_rk = dc[[r, k]] + dh_rk * o * (1.0 - tc * tc);
                dz[[r, k]] = dc_rk * gg * i * (1.0 - i);
                dz[[r, h + k]] = dc_rk * c_prev[[r, k]] * f * (1.0 - f);
                dz[[r, 2 * h + k]] = dc_rk * i * (1.0 - gg * gg);
                dz[[r, 3 * h + k]] = dh_rk * tc * o * (1.0 - o);
                dc[[r, k]] = dc_rk * f;
            }
        }

        general_mat_mul(1.0, &tape.inputs[t].t(), &dz, 1.0, &mut g.w_input);
        general_mat_mul(1.0, &tape.hidden[t].t(), &dz, 1.0, &mut g.w_recurrent);
        add_column_sums(&mut g.bias, &dz);

        let mut dx = dz.dot(&w_input_t);
        if let Some(mask) = tape.embed_masks.get(t) {
            dx *= mask;
        }
        for r in 0..b {
            let row = tape.idx[[r, t]];
            if row == PAD_INDEX {
                continue;
            }
            let mut target = g.embedding.row_mut(row);
            target += &dx.row(r);
            if !grads.touched[row] {
                grads.touched[row] = true;
                grads.touched_rows.push(row);
            }
        }

        dh = dz.dot(&w_rec_t);
    }
}

/// Mean loss over the batch without dropout; used by the gradient checker.
pub(crate) fn batch_loss(
    params: &Params,
    config: &RecurrentConfig,
    idx: &Array2<usize>,
    labels: &[usize],
) -> Result<f64> {
    let (logits, _) = forward_batch(params, config, idx, None)?;
    Ok(loss_and_grad(config.head(), &logits, labels).0)
}
