//! Replayable dropout masks keyed by where they are drawn.

use std::sync::Arc;

use amptcr_core::numeric::fnv1a64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Identifies one training step's sample; `site` is added per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub epoch: u64,
    pub batch: u64,
    pub sample: u64,
}

impl DropoutKey {
    fn stream(&self, layer: u64, site: u64) -> u64 {
        let mut b = Vec::with_capacity(48);
        for v in [self.seed, self.epoch, self.batch, self.sample, layer, site] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        fnv1a64(&b)
    }
}

/// Inverted-dropout mask: zeros with probability `rate`, else `1/(1 − rate)`.
pub fn mask(rows: usize, cols: usize, rate: f64, key: &DropoutKey, layer: u64, site: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(key.stream(layer, site));
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Applies dropout when a key is given and the rate is positive.
pub fn apply(tape: &mut Tape, x: Var, rate: f64, key: Option<&DropoutKey>, layer: u64, site: u64) -> Var {
    match key {
        Some(k) if rate > 0.0 => {
            let [r, c] = tape.value(x).shape();
            tape.mul_const(x, Arc::new(mask(r, c, rate, k, layer, site)))
        }
        _ => x,
    }
}
