use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::spectrum::Spectrum;

use super::adam::{adam_step, AdamState, TrainHyper};
use super::checkpoint::Checkpoint;
use super::network::{Network, NetworkConfig};
use super::tensor::Tensor;

/// Per-position mean of the training inputs.
pub fn position_means(inputs: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len() as f64;
    let len = inputs.first().map_or(0, Vec::len);
    let mut means = vec![0.0; len];
    for x in inputs {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    means
}

fn gather(rows: &[Vec<f64>], idx: &[usize], shifts: &[usize]) -> Result<Tensor> {
    let len = rows[idx[0]].len();
    let mut data = Vec::with_capacity(idx.len() * len);
    for (&i, &s) in idx.iter().zip(shifts) {
        let row = &rows[i];
        data.extend_from_slice(&row[len - s..]);
        data.extend_from_slice(&row[..len - s]);
    }
    Tensor::new(data, [idx.len(), 1, len])
}

/// Trains a freshly initialized network. `on_epoch` sees each epoch's
/// mean per-spectrum loss as it completes.
pub fn train_with(
    config: NetworkConfig,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Checkpoint> {
    hyper.validate()?;
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    for row in inputs.iter().chain(targets) {
        if row.len() != config.input_len {
            return Err(Error::LengthMismatch {
                left: config.input_len,
                right: row.len(),
            });
        }
    }

    let config_len = config.input_len;
    let mut net = Network::init(config, hyper.seed)?;
    net.input_means = position_means(inputs);
    let mut adam = AdamState::new(net.params.len());
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..hyper.epochs {
        let mut rng = rng_from_seed(derive_seed(hyper.seed, &[stream::SHUFFLE, epoch as u64]));
        order.shuffle(&mut rng);
        let len = config_len;
        let shifts: Vec<usize> = if hyper.shift_augment {
            let mut rng = rng_from_seed(derive_seed(hyper.seed, &[stream::AUGMENT, epoch as u64]));
            (0..inputs.len())
                .map(|_| rng.random_range(0..len))
                .collect()
        } else {
            vec![0; inputs.len()]
        };
        let mut total = 0.0;
        for (k, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let start = k * hyper.batch_size;
            let shift = &shifts[start..start + chunk.len()];
            let x = gather(inputs, chunk, shift)?;
            let t = gather(targets, chunk, shift)?;
            let cache = net.forward_train(&x)?;
            let (loss, grads) = net.backward(Some(&cache), &t)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            net.commit_running(&cache);
            adam_step(&mut net.params, &grads, &mut adam, hyper)?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / inputs.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(Checkpoint {
        network: net,
        hyper: hyper.clone(),
        adam,
        history,
    })
}

pub fn train(
    config: NetworkConfig,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    hyper: &TrainHyper,
) -> Result<Checkpoint> {
    train_with(config, inputs, targets, hyper, |_, _| {})
}

/// Inference on a batch of equal-length spectra.
pub fn denoise_batch(ckpt: &Checkpoint, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let len = ckpt.network.config.input_len;
    if let Some(bad) = xs.iter().find(|x| x.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: bad.len(),
        });
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let out = ckpt.network.forward(&Tensor::from_rows(xs)?)?;
    Ok(out.data.chunks(len).map(<[f64]>::to_vec).collect())
}

pub fn denoise(ckpt: &Checkpoint, x: &Spectrum) -> Result<Spectrum> {
    let mut out = denoise_batch(ckpt, &[x.values()])?;
    Spectrum::new(out.pop().expect("one output per input"))
}
