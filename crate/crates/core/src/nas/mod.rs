//! Memory-constrained random architecture search.
//!
//! Each trial draws architectures until one fits the budget, trains it and
//! scores it by validation fall-class F1. Trial `i` uses the seed
//! `derive(master_seed, i)`, so results do not depend on execution order.

mod log;

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_weights, ClassWeights, WindowSet};
use crate::error::{Error, Result};
use crate::eval::{metrics, ConfusionCounts, MetricSet};
use crate::nn::{predict_windows, train, History, Model, TrainConfig};
use crate::seed::{self, Rng};
use crate::space::{
    param_count, sample_architecture, text::spec_digest, ArchitectureSpec, FeatureShape, Hyperparameters,
    MemoryEstimate, Pipeline, DEFAULT_BUDGET_KB,
};
use crate::tensor::Real;

pub use log::{read_trial_log, select_best, write_trial_log, TrialLogEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub pipeline: Pipeline,
    pub budget_kb: f64,
    pub n_feasible_trials: usize,
    pub master_seed: u64,
    pub max_rejections_per_trial: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Caps training windows per trial (all falls kept); `None` uses all.
    pub max_train_windows: Option<usize>,
    /// Trials trained concurrently; 0 uses every available core.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            pipeline: Pipeline::Cnn,
            budget_kb: DEFAULT_BUDGET_KB,
            n_feasible_trials: 20,
            master_seed: 0,
            max_rejections_per_trial: 10_000,
            batch_size: 916,
            max_epochs: 100,
            patience: 10,
            max_train_windows: None,
            jobs: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_feasible_trials == 0 {
            return Err(Error::Config("n_feasible_trials must be at least 1".into()));
        }
        if !self.budget_kb.is_finite() || self.budget_kb <= 0.0 {
            return Err(Error::Config(format!(
                "budget_kb must be positive, got {}",
                self.budget_kb
            )));
        }
        if self.max_rejections_per_trial == 0 {
            return Err(Error::Config("max_rejections_per_trial must be at least 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be positive with patience <= max_epochs".into(),
            ));
        }
        Ok(())
    }
}

/// Training and validation windows shared by every trial.
#[derive(Debug, Clone)]
pub struct SearchData {
    pub train: WindowSet,
    pub validation: WindowSet,
    pub class_weights: ClassWeights,
    pub input: FeatureShape,
}

impl SearchData {
    /// Optionally subsamples the training windows, then derives class
    /// weights from what remains.
    pub fn new(train: WindowSet, validation: WindowSet, max_train_windows: Option<usize>, seed: u64) -> Result<Self> {
        let train = match max_train_windows {
            Some(max) => train.subsample(max, seed::derive_labeled(seed, "subsample")),
            None => train,
        };
        if train.fall_count() == 0 {
            return Err(Error::NoFallWindows);
        }
        if validation.is_empty() {
            return Err(Error::Data("validation set is empty".into()));
        }
        let class_weights = class_weights(&train.windows)?;
        let input = FeatureShape::Seq {
            len: train.length,
            channels: crate::data::CHANNELS,
        };
        Ok(Self {
            train,
            validation,
            class_weights,
            input,
        })
    }
}

/// One draw from the space during a trial's rejection loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub memory_kb: f64,
    pub accepted: bool,
}

/// The outcome of a trial's rejection loop.
#[derive(Debug, Clone)]
pub struct FeasibleDraw {
    pub spec: ArchitectureSpec,
    pub hyperparameters: Hyperparameters,
    pub memory: MemoryEstimate,
    pub samples: Vec<SampleRecord>,
}

impl FeasibleDraw {
    pub fn rejected_count(&self) -> usize {
        self.samples.len() - 1
    }
}

/// Samples until an architecture fits `budget_kb`. Fails after
/// `max_rejections` consecutive infeasible draws.
pub fn draw_feasible(
    pipeline: Pipeline,
    input: FeatureShape,
    budget_kb: f64,
    max_rejections: usize,
    rng: &mut Rng,
) -> Result<FeasibleDraw> {
    let mut samples = Vec::new();
    loop {
        let (spec, hyperparameters) = sample_architecture(pipeline, input, rng);
        let memory = param_count(&spec, input)?;
        let accepted = memory.kilobytes <= budget_kb;
        samples.push(SampleRecord {
            memory_kb: memory.kilobytes,
            accepted,
        });
        if accepted {
            return Ok(FeasibleDraw {
                spec,
                hyperparameters,
                memory,
                samples,
            });
        }
        if samples.len() >= max_rejections {
            return Err(Error::InfeasibleBudget {
                budget_kb,
                rejections: samples.len(),
            });
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult<T> {
    pub index: usize,
    pub spec: ArchitectureSpec,
    pub hyperparameters: Hyperparameters,
    pub memory: MemoryEstimate,
    pub val_f1: f64,
    pub val_counts: ConfusionCounts,
    pub model: Model<T>,
    pub rejected_count: usize,
    /// Every draw of the rejection loop, the accepted one last.
    pub samples: Vec<SampleRecord>,
    pub history: History,
    /// Training hit a non-finite value; the trial scores F1 = 0.
    pub diverged: bool,
}

impl<T> TrialResult<T> {
    pub fn log_entry(&self) -> TrialLogEntry {
        TrialLogEntry {
            index: self.index,
            memory_kb: self.memory.kilobytes,
            val_f1: self.val_f1,
            rejected_count: self.rejected_count,
            spec_digest: spec_digest(&self.spec),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    /// Ordered by trial index.
    pub trials: Vec<TrialResult<T>>,
    /// Position of the selected trial in `trials`.
    pub best: usize,
    /// Number of models trained; equals the trial count.
    pub training_calls: usize,
}

impl<T> SearchOutcome<T> {
    pub fn best(&self) -> &TrialResult<T> {
        &self.trials[self.best]
    }

    pub fn into_best(mut self) -> TrialResult<T> {
        self.trials.swap_remove(self.best)
    }

    pub fn log(&self) -> Vec<TrialLogEntry> {
        self.trials.iter().map(TrialResult::log_entry).collect()
    }
}

/// Fall-class metrics of a model on a window set at threshold 0.5.
pub fn evaluate_trial<T: Real>(model: &Model<T>, windows: &WindowSet) -> Result<(MetricSet, ConfusionCounts)> {
    let probs = predict_windows(model, windows)?;
    let counts = ConfusionCounts::from_probabilities(&probs, &windows.labels());
    Ok((metrics(&counts), counts))
}

fn run_trial<T: Real>(
    index: usize,
    config: &SearchConfig,
    data: &SearchData,
    calls: &AtomicUsize,
) -> Result<TrialResult<T>> {
    let trial_seed = seed::derive(config.master_seed, index as u64);
    let mut rng = seed::rng(trial_seed);
    let draw = draw_feasible(
        config.pipeline,
        data.input,
        config.budget_kb,
        config.max_rejections_per_trial,
        &mut rng,
    )?;
    let mut model = Model::<T>::new(draw.spec.clone(), data.input, seed::derive_labeled(trial_seed, "init"))?;
    let train_config = TrainConfig {
        learning_rate: draw.hyperparameters.learning_rate,
        batch_size: config.batch_size,
        max_epochs: config.max_epochs,
        patience: config.patience,
        lasso_lambda: draw.hyperparameters.lasso_lambda,
        class_weights: data.class_weights,
        seed: seed::derive_labeled(trial_seed, "train"),
    };
    calls.fetch_add(1, Ordering::SeqCst);
    let (history, diverged) = match train(&mut model, &data.train, &data.validation, &train_config) {
        Ok(h) => (h, false),
        Err(e) if matches!(e.root(), Error::NonFinite(_)) => (History::default(), true),
        Err(e) => return Err(e.context(format!("trial {index}"))),
    };
    let (val_f1, val_counts) = if diverged {
        (0.0, ConfusionCounts::default())
    } else {
        let (m, c) = evaluate_trial(&model, &data.validation)?;
        (m.f1, c)
    };
    Ok(TrialResult {
        index,
        rejected_count: draw.rejected_count(),
        spec: draw.spec,
        hyperparameters: draw.hyperparameters,
        memory: draw.memory,
        val_f1,
        val_counts,
        model,
        samples: draw.samples,
        history,
        diverged,
    })
}

/// Runs `n_feasible_trials` trials, `jobs` at a time, and selects the best
/// by validation F1, then smaller memory, then lower index.
pub fn run_search<T: Real>(config: &SearchConfig, data: &SearchData) -> Result<SearchOutcome<T>> {
    config.validate()?;
    let calls = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trials: Vec<TrialResult<T>> = pool.install(|| {
        (0..config.n_feasible_trials)
            .into_par_iter()
            .map(|i| run_trial(i, config, data, &calls))
            .collect::<Result<_>>()
    })?;
    let log: Vec<TrialLogEntry> = trials.iter().map(TrialResult::log_entry).collect();
    let best_index = select_best(&log).expect("at least one trial");
    let best = trials
        .iter()
        .position(|t| t.index == best_index)
        .expect("selected trial exists");
    Ok(SearchOutcome {
        trials,
        best,
        training_calls: calls.into_inner(),
    })
}
