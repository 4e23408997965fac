use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetPair;
use super::model::{ModelSpec, Network};
use crate::error::{ensure, Result};
use crate::geometry::Image;
use crate::nn::{adam_step, AdamConfig, AdamState, Parameterized};

pub const DEFAULT_BATCH_SIZE: usize = 5;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub model: ModelSpec,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn new(model: ModelSpec, seed: u64) -> Self {
        TrainConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            split_fraction: DEFAULT_SPLIT,
            seed,
            model,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.batch_size >= 1, "batch size must be at least 1");
        ensure!(self.epochs >= 1, "training needs at least one epoch");
        ensure!(
            self.split_fraction > 0.0 && self.split_fraction < 1.0,
            "split fraction must lie strictly between 0 and 1, got {}",
            self.split_fraction
        );
        self.adam.validate()?;
        self.model.msd.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights with the lowest validation loss.
    pub network: Network,
    pub history: Vec<EpochLoss>,
    /// 1-based epoch the returned weights come from; 0 means the initial weights.
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub optimizer: AdamState,
}

/// Seeded random partition into `(train, validation)` index lists, each non-empty.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    ensure!(n >= 2, "need at least two pairs to hold out a validation set, got {n}");
    ensure!(fraction > 0.0 && fraction < 1.0, "split fraction must lie strictly between 0 and 1, got {fraction}");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

fn batch_loss(net: &Network, pairs: &[DatasetPair], idx: &[usize]) -> Result<f64> {
    let inputs: Vec<&Image> = idx.iter().map(|&i| &pairs[i].input).collect();
    let targets: Vec<&Image> = idx.iter().map(|&i| &pairs[i].target).collect();
    net.loss(&inputs, &targets)
}

/// Minibatch Adam on the MSE loss. Training loss per epoch is the
/// sample-weighted mean over its minibatches; validation loss is measured
/// after the epoch.
pub fn train(config: &TrainConfig, dataset: &[DatasetPair], initial: Option<Network>) -> Result<TrainOutcome> {
    config.validate()?;
    ensure!(!dataset.is_empty(), "training dataset is empty");
    let (train_idx, val_idx) = split_indices(dataset.len(), config.split_fraction, config.seed)?;
    let mut net = match initial {
        Some(n) => n,
        None => config.model.build(config.seed)?,
    };
    let lens: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(config.adam, &lens)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_ba7c);
    let mut order = train_idx.clone();

    let mut best = net.clone();
    let mut best_val = batch_loss(&net, dataset, &val_idx)?;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&Image> = batch.iter().map(|&i| &dataset[i].input).collect();
            let targets: Vec<&Image> = batch.iter().map(|&i| &dataset[i].target).collect();
            let (loss, grad) = net.loss_and_grad(&inputs, &targets)?;
            total += loss * batch.len() as f64;
            let mut offset = 0;
            let grads: Vec<&[f64]> = lens
                .iter()
                .map(|&l| {
                    let g = &grad[offset..offset + l];
                    offset += l;
                    g
                })
                .collect();
            adam_step(&mut net.params_mut(), &grads, &mut adam)?;
        }
        let train_loss = total / order.len() as f64;
        let val_loss = batch_loss(&net, dataset, &val_idx)?;
        ensure!(train_loss.is_finite() && val_loss.is_finite(), "training diverged at epoch {epoch}");
        if val_loss < best_val {
            best_val = val_loss;
            best = net.clone();
            best_epoch = epoch;
        }
        history.push(EpochLoss { epoch, train_loss, val_loss });
    }
    Ok(TrainOutcome { network: best, history, best_epoch, train_indices: train_idx, val_indices: val_idx, optimizer: adam })
}
