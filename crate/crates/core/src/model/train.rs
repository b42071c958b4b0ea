use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{batch_tensor, Model};
use super::optim::{AdamW, TrainConfig};
use super::tape::Tape;
use super::ModelError;
use crate::analysis::psnr;
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Learning rate at the epoch's last step.
    pub lr: f64,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    /// `10·log10(1/loss)`: the running training-mode PSNR (unclamped outputs).
    pub psnr: f64,
}

/// One optimizer step on `batch`; returns the loss before the update.
/// `mask` selects the pixels that contribute to the loss.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    opt: &mut AdamW<T>,
    batch: &[&Image],
    mask: Option<Vec<bool>>,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<f64, ModelError> {
    let target = batch_tensor::<T>(batch)?;
    let mut tape = Tape::new();
    let vars = model.params.register(&mut tape);
    let x = tape.leaf(target.clone());
    let out = model.network.forward(&mut tape, &vars, x)?;
    let loss = tape.mse(out.reconstruction, &target, mask)?;
    let value = tape.value(loss).data[0].to_f64_lossy();
    if !value.is_finite() {
        return Err(ModelError::NonFinite(format!("training loss became {value}")));
    }
    let grads = tape.backward(loss)?;
    let g: Vec<Vec<T>> = model
        .params
        .entries
        .iter()
        .zip(&vars)
        .map(|(e, &v)| grads.wrt(v, e.tensor.len()))
        .collect();
    opt.update(&mut model.params, &g, lr, cfg);
    Ok(value)
}

/// Reconstruction training with per-epoch shuffling seeded by `seed`.
/// `on_epoch` sees each epoch's metrics as soon as it finishes.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    data: &[Image],
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>, ModelError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ModelError::InvalidConfig("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamW::new(&model.params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.total_epochs);
    for epoch in 0..cfg.total_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut lr) = (0.0, 0.0);
        for (s, chunk) in order.chunks(cfg.batch_size).enumerate() {
            lr = cfg.lr_at(epoch as f64 + s as f64 / steps_per_epoch as f64);
            let batch: Vec<&Image> = chunk.iter().map(|&i| &data[i]).collect();
            loss_sum += train_step(model, &mut opt, &batch, None, lr, cfg)?;
        }
        let loss = loss_sum / steps_per_epoch as f64;
        let m = EpochMetrics {
            epoch,
            lr,
            loss,
            psnr: 10.0 * (1.0 / loss).log10(),
        };
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

/// Mean per-image PSNR (peak 1) of clamped reconstructions.
pub fn evaluate_psnr<T: Scalar>(model: &Model<T>, data: &[Image]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for chunk in data.chunks(64) {
        let refs: Vec<&Image> = chunk.iter().collect();
        for (rec, img) in model.reconstruct_batch(&refs)?.iter().zip(chunk) {
            total += psnr(img, rec, 1.0).map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
        }
    }
    Ok(total / data.len() as f64)
}
