//! Mini-batch training: seeded shuffles, Adam updates, step-decayed
//! learning rate, per-epoch loss bookkeeping.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainingExample;
use crate::nn::{adam_step, backward, AdamState, NetworkConfig, NetworkParams};
use crate::rng::{self, STREAM_INIT, STREAM_SHUFFLE};
use crate::{Error, Result};

/// Optimizer hyperparameters. The defaults are the reference recipe:
/// batches of 64, Adam at 1e-4 decayed by 0.1 every 200 epochs, 1,200
/// epochs total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-4,
            lr_decay_factor: 0.1,
            lr_decay_every: 200,
            epochs: 1200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.lr_decay_every == 0 {
            return Err(Error::invalid(
                "batch size, epochs and decay period must be >= 1",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "decay factor must be in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Learning rate for a 1-indexed epoch: the base rate for the first
    /// `lr_decay_every` epochs, then multiplied by the factor after each
    /// further `lr_decay_every`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let steps = (epoch - 1) / self.lr_decay_every;
        self.learning_rate * self.lr_decay_factor.powi(steps as i32)
    }
}

/// Everything a training run produced. Wall time is informational only and
/// is never serialized, so artifacts stay byte-reproducible.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean training loss per epoch (example-weighted over batches).
    pub losses: Vec<f64>,
    /// Learning rate used in each epoch.
    pub lrs: Vec<f64>,
    pub params: NetworkParams,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Trains a fresh network on the given examples. Initialization, the
/// per-epoch shuffles and therefore the final parameters are fully
/// determined by `train_config.seed`. Batches are taken in shuffle order;
/// a final short batch is kept. Returns an error if any batch loss goes
/// non-finite, naming the epoch and batch.
pub fn train(
    examples: &[TrainingExample],
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
) -> Result<TrainReport> {
    net_config.validate()?;
    train_config.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for (i, ex) in examples.iter().enumerate() {
        if ex.channels != net_config.in_channels
            || ex.window_len != net_config.window_len
            || ex.label.len() != net_config.out_dim
        {
            return Err(Error::ShapeMismatch(format!(
                "example {i}: {} channels x {} samples with {} labels, network wants {} x {} -> {}",
                ex.channels,
                ex.window_len,
                ex.label.len(),
                net_config.in_channels,
                net_config.window_len,
                net_config.out_dim
            )));
        }
    }

    let start = Instant::now();
    let mut params = NetworkParams::init(
        net_config,
        rng::derive_seed(train_config.seed, &[STREAM_INIT]),
    );
    let mut state = AdamState::new(net_config);
    let mut losses = Vec::with_capacity(train_config.epochs);
    let mut lrs = Vec::with_capacity(train_config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=train_config.epochs {
        let lr = train_config.lr_at_epoch(epoch);
        let mut shuffle_rng = rng::stream(rng::derive_seed(
            train_config.seed,
            &[STREAM_SHUFFLE, epoch as u64],
        ));
        order.shuffle(&mut shuffle_rng);

        let mut weighted_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let windows: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| examples[i].window.as_slice())
                .collect();
            let targets: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| examples[i].label.as_slice())
                .collect();
            let (grads, loss) = backward(&params, net_config, &windows, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            adam_step(
                &mut params,
                &grads,
                &mut state,
                lr,
                train_config.beta1,
                train_config.beta2,
                train_config.epsilon,
            );
            weighted_loss += loss * chunk.len() as f64;
        }
        losses.push(weighted_loss / examples.len() as f64);
        lrs.push(lr);
    }

    Ok(TrainReport {
        losses,
        lrs,
        params,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: train_config.seed,
    })
}

/// Writes the per-epoch training log as CSV: `epoch,train_loss,lr`.
pub fn write_train_log(report: &TrainReport, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,lr\n");
    for (i, (loss, lr)) in report.losses.iter().zip(&report.lrs).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, loss, lr);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
