//! Fixed-epoch training with per-fetch jitter.

use amptcr_core::cloudstore::{default_jitter, AmptcrCloud};
use amptcr_core::evalkit::Task;
use amptcr_core::fingerprint::Fingerprint;
use amptcr_core::numeric::fnv1a64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dropout::DropoutKey;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelInput, TargetScale};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Sample {
    pub cloud: AmptcrCloud,
    pub fingerprint: Option<Fingerprint>,
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
}

pub struct Adam {
    lr: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        Adam {
            lr,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for (((p, g), m), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

fn sample_seed(seed: u64, epoch: usize, batch: usize, sample: usize) -> u64 {
    let mut b = Vec::with_capacity(32);
    for v in [seed, epoch as u64, batch as u64, sample as u64] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    fnv1a64(&b)
}

fn check_layouts(samples: &[&Sample]) -> Result<(usize, usize)> {
    let first = samples.first().ok_or_else(|| Error::invalid("training set is empty"))?;
    let layout = &first.cloud.meta.channel_layout;
    let bits = first.fingerprint.as_ref().map_or(0, Fingerprint::nbits);
    for s in samples {
        if &s.cloud.meta.channel_layout != layout {
            return Err(Error::invalid(format!("cloud {} has a different channel layout", s.cloud.meta.name)));
        }
        if s.fingerprint.as_ref().map_or(0, Fingerprint::nbits) != bits {
            return Err(Error::invalid(format!("cloud {} has a different fingerprint size", s.cloud.meta.name)));
        }
    }
    Ok((layout.len(), bits))
}

pub struct Trained {
    pub model: Model,
    pub history: Vec<EpochRecord>,
}

/// Trains for exactly `config.epochs` epochs; no early stopping. Results
/// are identical for a given seed whatever the thread count.
pub fn train(samples: &[&Sample], config: &ModelConfig) -> Result<Trained> {
    config.validate()?;
    let (channels, bits) = check_layouts(samples)?;
    let fp_bits = if config.fp_weight() > 0.0 { bits } else { 0 };
    let mut model = Model::init(config.clone(), channels, fp_bits)?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    model.target = match config.task {
        Task::Regression if config.standardize_targets => TargetScale::fit(&labels),
        _ => TargetScale::identity(),
    };
    if config.task == Task::Binary && labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::invalid("binary labels must be 0 or 1"));
    }
    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, epoch, usize::MAX, 0));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<(f64, Vec<Tensor>)>> = chunk
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let s = samples[i];
                    let key = sample_seed(config.seed, epoch, batch, slot);
                    let cloud = if config.jitter { default_jitter(&s.cloud, key)? } else { s.cloud.clone() };
                    let input = ModelInput::new(&cloud, s.fingerprint.as_ref(), config)?;
                    let dk = DropoutKey {
                        seed: config.seed,
                        epoch: epoch as u64,
                        batch: batch as u64,
                        sample: slot as u64,
                    };
                    let mut f = model.forward(&input, Some(&dk))?;
                    let loss = match config.task {
                        Task::Regression => f.tape.squared_error(f.out, model.target.forward(s.label)),
                        Task::Binary => f.tape.logistic_loss(f.out, s.label),
                    };
                    let value = f.tape.value(loss).item();
                    let grads = f.tape.backward(loss);
                    Ok((value, f.bound.gradients(&model.params, &grads)))
                })
                .collect();
            let mut total: Option<Vec<Tensor>> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = match r {
                    Err(Error::NonFinite(_)) => return Err(Error::NanLoss { epoch, batch }),
                    other => other?,
                };
                if !loss.is_finite() {
                    return Err(Error::NanLoss { epoch, batch });
                }
                batch_loss += loss;
                match &mut total {
                    Some(t) => t.iter_mut().zip(&grads).for_each(|(a, b)| a.add_assign(b)),
                    None => total = Some(grads),
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            let mut total = total.expect("nonempty batch");
            for t in &mut total {
                t.data.iter_mut().for_each(|v| *v *= scale);
            }
            adam.step(&mut model.params, &total);
            epoch_loss += batch_loss;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / samples.len() as f64,
        });
    }
    Ok(Trained { model, history })
}

/// `epoch,train_loss` rows.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss\n");
    for r in history {
        s.push_str(&format!("{},{}\n", r.epoch, r.train_loss));
    }
    s
}
