use ndarray::{Array1, Array2};

use super::lstm::{backward, encode_batch, forward_batch, loss_and_grad, batch_loss, Grads};
use super::{Params, RecurrentModel};
use crate::error::{Error, Result};
use crate::text::PAD_INDEX;

/// Gradients smaller than this are compared in absolute terms.
const RELATIVE_FLOOR: f64 = 1e-6;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Largest relative difference between the backpropagated gradient of the
/// cross-entropy loss on one example and central finite differences with
/// step `eps`, over every trainable parameter (the frozen padding row is
/// skipped). Dropout is off.
pub fn gradient_check(model: &RecurrentModel, example: (&[usize], usize), eps: f64) -> Result<f64> {
    let (tokens, label) = example;
    if tokens.is_empty() {
        return Err(Error::Input("gradient check needs a non-empty sequence".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let config = model.config();
    if label >= config.n_classes {
        return Err(Error::Input(format!("label {label} outside {} classes", config.n_classes)));
    }
    let idx = encode_batch(&[tokens], config.max_seq_len, model.vocab_size())?;
    let labels = [label];

    let (logits, tape) = forward_batch(&model.params, config, &idx, None)?;
    let (_, dlogits) = loss_and_grad(config.head(), &logits, &labels);
    let mut grads = Grads::new(&model.params);
    backward(&model.params, &tape, &dlogits, &mut grads);
    let analytic = grads.params;

    let mut params = model.params.clone();
    let mut worst = 0.0f64;
    let mut probe = |params: &mut Params,
                     get: &dyn Fn(&mut Params) -> &mut f64,
                     analytic: f64|
     -> Result<()> {
        let original = *get(params);
        *get(params) = original + eps;
        let plus = batch_loss(params, config, &idx, &labels)?;
        *get(params) = original - eps;
        let minus = batch_loss(params, config, &idx, &labels)?;
        *get(params) = original;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic, numeric));
        Ok(())
    };

    let matrix_entries = |m: &Array2<f64>| {
        let (r, c) = m.dim();
        (0..r).flat_map(move |i| (0..c).map(move |j| (i, j)))
    };
    let vector_entries = |v: &Array1<f64>| 0..v.len();

    for (i, j) in matrix_entries(&analytic.embedding) {
        if i == PAD_INDEX {
            continue;
        }
        probe(&mut params, &|p| &mut p.embedding[[i, j]], analytic.embedding[[i, j]])?;
    }
    for (i, j) in matrix_entries(&analytic.w_input) {
        probe(&mut params, &|p| &mut p.w_input[[i, j]], analytic.w_input[[i, j]])?;
    }
    for (i, j) in matrix_entries(&analytic.w_recurrent) {
        probe(&mut params, &|p| &mut p.w_recurrent[[i, j]], analytic.w_recurrent[[i, j]])?;
    }
    for k in vector_entries(&analytic.bias) {
        probe(&mut params, &|p| &mut p.bias[k], analytic.bias[k])?;
    }
    for (i, j) in matrix_entries(&analytic.w_out) {
        probe(&mut params, &|p| &mut p.w_out[[i, j]], analytic.w_out[[i, j]])?;
    }
    for k in vector_entries(&analytic.b_out) {
        probe(&mut params, &|p| &mut p.b_out[k], analytic.b_out[k])?;
    }
    Ok(worst)
}
