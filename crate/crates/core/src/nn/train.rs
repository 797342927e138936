//! Mini-batch training with validation-loss early stopping.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{logit_gradient, weighted_bce};
use super::model::Model;
use crate::data::{ClassWeights, WindowSet};
use crate::error::{Error, Result};
use crate::seed;
use crate::space::sample::{LASSO_LAMBDA, LEARNING_RATE};
use crate::tensor::Real;

/// Windows per inference chunk.
const PREDICT_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Zero disables the penalty; otherwise within the searchable range.
    pub lasso_lambda: f64,
    pub class_weights: ClassWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 916,
            max_epochs: 100,
            patience: 10,
            lasso_lambda: 1e-4,
            class_weights: ClassWeights::UNIT,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(LEARNING_RATE.0..=LEARNING_RATE.1).contains(&self.learning_rate) {
            return bad(format!(
                "learning rate {} outside {:?}",
                self.learning_rate, LEARNING_RATE
            ));
        }
        if self.lasso_lambda != 0.0 && !(LASSO_LAMBDA.0..=LASSO_LAMBDA.1).contains(&self.lasso_lambda) {
            return bad(format!("lasso lambda {} outside {:?}", self.lasso_lambda, LASSO_LAMBDA));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, epochs and patience must be positive".into());
        }
        if self.patience > self.max_epochs {
            return bad(format!(
                "patience {} exceeds max epochs {}",
                self.patience, self.max_epochs
            ));
        }
        let w = self.class_weights;
        if !(w.adl > 0.0 && w.fall > 0.0 && w.adl.is_finite() && w.fall.is_finite()) {
            return bad(format!("class weights must be positive, got {w:?}"));
        }
        Ok(())
    }
}

/// Per-epoch losses. Epochs are numbered from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

impl History {
    pub fn epochs_run(&self) -> usize {
        self.val_loss.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best monitored loss. Only a strict decrease counts as
/// improvement; after `patience` epochs without one, training stops.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Inference-mode fall probabilities for every window, in order.
/// Chunks run in parallel; each window's output does not depend on chunking.
pub fn predict_windows<T: Real>(model: &Model<T>, windows: &WindowSet) -> Result<Vec<f64>> {
    let indices: Vec<usize> = (0..windows.len()).collect();
    let chunks: Vec<Vec<f64>> = indices
        .par_chunks(PREDICT_CHUNK)
        .map(|idx| {
            let y = model.predict(&windows.batch::<T>(idx))?;
            Ok(y.data().iter().map(|v| v.to_f64_lossy()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Weighted cross-entropy of the model over a window set in inference mode.
pub fn evaluate_loss<T: Real>(model: &Model<T>, windows: &WindowSet, weights: ClassWeights) -> Result<f64> {
    let probs = predict_windows(model, windows)?;
    let targets: Vec<f64> = windows.targets(&(0..windows.len()).collect::<Vec<_>>());
    weighted_bce(&probs, &targets, weights)
}

/// One shuffled pass over `train_set` with Adam updates. Returns the mean
/// weighted training loss (without the L1 term).
pub fn run_epoch<T: Real>(
    model: &mut Model<T>,
    adam: &mut Adam<T>,
    train_set: &WindowSet,
    config: &TrainConfig,
    order: &mut Vec<usize>,
    rng: &mut seed::Rng,
) -> Result<f64> {
    if order.len() != train_set.len() {
        *order = (0..train_set.len()).collect();
    }
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    for idx in order.chunks(config.batch_size) {
        let x = train_set.batch::<T>(idx);
        let t = train_set.targets::<T>(idx);
        let (y, tape) = model.forward_tape(&x, rng)?;
        let loss = weighted_bce(y.data(), &t, config.class_weights)?;
        loss_sum += loss.to_f64_lossy() * idx.len() as f64;
        let g = logit_gradient(y.data(), &t, config.class_weights)?;
        let mut grads = model.backward(&tape, &g)?;
        model.regularize(&mut grads, config.lasso_lambda);
        adam.step(model, &grads)?;
    }
    Ok(loss_sum / train_set.len() as f64)
}

/// Trains in place and leaves `model` at its best-validation-loss snapshot.
pub fn train<T: Real>(
    model: &mut Model<T>,
    train_set: &WindowSet,
    val_set: &WindowSet,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    if train_set.fall_count() == 0 {
        return Err(Error::NoFallWindows);
    }
    let mut rng = seed::rng(seed::derive_labeled(config.seed, "train"));
    let mut adam = Adam::new(model, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = History::default();
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        let train_loss = run_epoch(model, &mut adam, train_set, config, &mut order, &mut rng)?;
        history.train_loss.push(train_loss);
        let val = evaluate_loss(model, val_set, config.class_weights)?;
        history.val_loss.push(val);
        match stopper.observe(epoch, val) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    history.best_epoch = stopper.best_epoch();
    *model = best;
    Ok(history)
}
