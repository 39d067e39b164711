use super::adam::AdamState;
use super::lstm::{backward, encode_batch, forward_batch, loss_and_grad, Grads};
use super::{RecurrentConfig, RecurrentModel, TRAIN_STREAM};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::text::EmbeddingMatrix;

/// Trains the classifier for `config.epochs` passes over `examples`
/// (token indices, class). Shuffling and dropout are seeded from
/// `config.seed`.
pub fn train_recurrent(
    examples: &[(Vec<usize>, usize)],
    config: &RecurrentConfig,
    init_emb: &EmbeddingMatrix,
) -> Result<RecurrentModel> {
    train_recurrent_traced(examples, config, init_emb).map(|(m, _)| m)
}

/// Like [`train_recurrent`], also returning the mean training loss of each
/// epoch.
pub fn train_recurrent_traced(
    examples: &[(Vec<usize>, usize)],
    config: &RecurrentConfig,
    init_emb: &EmbeddingMatrix,
) -> Result<(RecurrentModel, Vec<f64>)> {
    let mut model = RecurrentModel::new(config.clone(), init_emb)?;
    if let Some((_, bad)) = examples.iter().find(|(_, y)| *y >= config.n_classes) {
        return Err(Error::Input(format!(
            "label {bad} outside {} classes",
            config.n_classes
        )));
    }
    let mut rng = Rng::new(derive_seed(config.seed, TRAIN_STREAM));
    let mut adam = AdamState::new(&model.params);
    let mut grads = Grads::new(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let vocab_size = model.vocab_size();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_i, batch) in order.chunks(config.batch_size).enumerate() {
            let seqs: Vec<&[usize]> = batch.iter().map(|&i| examples[i].0.as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| examples[i].1).collect();
            let idx = encode_batch(&seqs, config.max_seq_len, vocab_size)?;
            let diverged = |loss: f64| Error::Diverged {
                epoch,
                batch: batch_i,
                loss,
            };
            let (logits, tape) = forward_batch(&model.params, config, &idx, Some(&mut rng))
                .map_err(|_| diverged(f64::NAN))?;
            let (loss, dlogits) = loss_and_grad(config.head(), &logits, &labels);
            if !loss.is_finite() {
                return Err(diverged(loss));
            }
            loss_sum += loss * batch.len() as f64;
            grads.clear();
            backward(&model.params, &tape, &dlogits, &mut grads);
            adam.update(&mut model.params, &grads, config);
        }
        if !model.params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: examples.len().div_ceil(config.batch_size),
                loss: f64::NAN,
            });
        }
        epoch_losses.push(loss_sum / examples.len().max(1) as f64);
    }
    Ok((model, epoch_losses))
}
