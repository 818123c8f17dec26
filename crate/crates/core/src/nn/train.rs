use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::nn::lstm::{backward_into, forward_cached};
use crate::nn::model::LstmModel;
use crate::nn::optim::{clip_gradient, sgdm_step, OptimizerState, TrainHyper};
use crate::nn::params::{Architecture, LstmParams};
use crate::types::LabeledDataset;

/// Mean training loss of every epoch, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainHyper {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            rng_seed: cfg.training_seed(),
            grad_clip: cfg.grad_clip,
        }
    }
}

pub fn train(
    dataset: &LabeledDataset,
    arch: Architecture,
    hyper: &TrainHyper,
) -> Result<(LstmModel, TrainLog)> {
    train_with(dataset, arch, hyper, None, |_, _| {})
}

/// Mini-batch SGDM over shuffled epochs.
///
/// The batch gradient is the mean of per-sample gradients, accumulated in
/// sample order; the final short batch of an epoch is kept. `on_epoch`
/// receives the 1-based epoch index and its mean loss.
pub fn train_with(
    dataset: &LabeledDataset,
    arch: Architecture,
    hyper: &TrainHyper,
    config: Option<SystemConfig>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(LstmModel, TrainLog)> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let arch = Architecture::new(arch.hidden, arch.classes)?;
    if arch.classes != dataset.num_classes() {
        return Err(Error::Config(format!(
            "network has {} outputs but the dataset has {} classes",
            arch.classes,
            dataset.num_classes()
        )));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let mut shuffle_rng = init_rng.clone();
    shuffle_rng.set_stream(1);
    let mut params = LstmParams::init(arch, &mut init_rng);
    let mut state = OptimizerState::new(&params);
    let mut grads = LstmParams::zeros(arch);

    let samples = dataset.samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                let cache = forward_cached(&s.sequence, &params)?;
                total += backward_into(&cache, s.label, &params, &mut grads, scale)?;
            }
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!("gradient in epoch {epoch}")));
            }
            if hyper.grad_clip > 0.0 {
                clip_gradient(&mut grads, hyper.grad_clip);
            }
            sgdm_step(&mut params, &grads, &mut state, hyper);
        }
        let mean = total / samples.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.5}");
        on_epoch(epoch, mean);
        log.epoch_losses.push(mean);
    }

    let model = LstmModel {
        params,
        w: dataset.w(),
        slot_duration: samples[0].sequence.slot_duration(),
        hyper: *hyper,
        config,
    };
    Ok((model, log))
}

/// Fraction of samples whose predicted class equals the label.
pub fn training_accuracy(model: &LstmModel, dataset: &LabeledDataset) -> Result<f64> {
    let mut hits = 0usize;
    for s in dataset.samples() {
        if model.predict(&s.sequence)? == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len().max(1) as f64)
}
