//! Random-search tuning and window-level evaluation of the ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{train_easyensemble, train_rusboost, EnsembleKind, EnsembleModel, TreeParams, DEFAULT_BAGS};
use super::smooth::smooth_predictions;
use crate::data::{segment::window_label, SampleSet, WindowConfig, FALL};
use crate::error::{Error, Result};
use crate::eval::{metrics, ConfusionCounts};
use crate::seed;

/// Window-level confusion counts for one recording: per-sample predictions
/// are smoothed and compared against the majority label of each window.
pub fn evaluate_signal(model: &EnsembleModel, signal: &SampleSet, window: WindowConfig) -> Result<ConfusionCounts> {
    let predicted = smooth_predictions(&model.predict_samples(&signal.samples), window)?;
    let truth: Vec<u8> = window
        .starts(signal.labels.len())?
        .map(|s| window_label(&signal.labels[s..s + window.length]))
        .collect();
    Ok(ConfusionCounts::from_binary(&predicted, &truth))
}

pub fn train_ensemble(
    kind: EnsembleKind,
    train: &SampleSet,
    params: &TreeParams,
    n_bags: usize,
    seed: u64,
) -> Result<EnsembleModel> {
    match kind {
        EnsembleKind::RusBoost => train_rusboost(&train.samples, &train.labels, params, seed),
        EnsembleKind::EasyEnsemble => train_easyensemble(&train.samples, &train.labels, params, n_bags, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub kind: EnsembleKind,
    pub n_trials: usize,
    pub n_bags: usize,
    pub master_seed: u64,
    /// Caps training rows per trial (every fall row kept); `None` uses all.
    pub max_train_samples: Option<usize>,
    /// Parameter draws are clamped to this estimator count when set.
    pub max_estimators: Option<usize>,
    pub jobs: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            kind: EnsembleKind::RusBoost,
            n_trials: 20,
            n_bags: DEFAULT_BAGS,
            master_seed: 0,
            max_train_samples: None,
            max_estimators: None,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrial {
    pub index: usize,
    pub params: TreeParams,
    pub val_f1: f64,
    /// Why training failed, if it did; such trials score 0.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub trials: Vec<TuneTrial>,
    pub best: usize,
    pub model: EnsembleModel,
}

/// Keeps every fall row and a uniform draw of ADL rows, in original order.
pub fn cap_samples(set: &SampleSet, max: usize, seed: u64) -> SampleSet {
    if set.samples.len() <= max {
        return set.clone();
    }
    let adl: Vec<usize> = (0..set.labels.len()).filter(|&i| set.labels[i] != FALL).collect();
    let falls = set.labels.len() - adl.len();
    let keep = max.saturating_sub(falls).min(adl.len());
    let mut rows: Vec<usize> = rand::seq::index::sample(&mut seed::rng(seed), adl.len(), keep)
        .into_iter()
        .map(|i| adl[i])
        .collect();
    rows.extend((0..set.labels.len()).filter(|&i| set.labels[i] == FALL));
    rows.sort_unstable();
    SampleSet {
        samples: rows.iter().map(|&i| set.samples[i]).collect(),
        labels: rows.iter().map(|&i| set.labels[i]).collect(),
    }
}

/// Random search over [`TreeParams`]; each trial is scored by smoothed
/// validation fall F1 pooled over the validation recordings. The best trial
/// (highest F1, lowest index on ties) is retrained into the returned model.
pub fn tune_ensemble(
    config: &TuneConfig,
    train: &SampleSet,
    validation: &[SampleSet],
    window: WindowConfig,
) -> Result<TuneOutcome> {
    if config.n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    if validation.is_empty() {
        return Err(Error::InsufficientParticipants(
            "tuning needs at least one validation recording".into(),
        ));
    }
    let train = match config.max_train_samples {
        Some(max) => cap_samples(train, max, seed::derive_labeled(config.master_seed, "cap")),
        None => train.clone(),
    };
    let run = |i: usize| -> Result<(TuneTrial, Option<EnsembleModel>)> {
        let trial_seed = seed::derive(config.master_seed, i as u64);
        let mut params = TreeParams::sample(&mut seed::rng(seed::derive_labeled(trial_seed, "params")));
        if let Some(cap) = config.max_estimators {
            params.n_estimators = params.n_estimators.min(cap.max(1));
        }
        let fitted = train_ensemble(
            config.kind,
            &train,
            &params,
            config.n_bags,
            seed::derive_labeled(trial_seed, "train"),
        );
        match fitted {
            Ok(model) => {
                let mut counts = ConfusionCounts::default();
                for v in validation {
                    counts.add(&evaluate_signal(&model, v, window)?);
                }
                let f1 = metrics(&counts).f1;
                Ok((
                    TuneTrial {
                        index: i,
                        params,
                        val_f1: f1,
                        error: None,
                    },
                    Some(model),
                ))
            }
            // Chance-level first rounds are a property of the draw, not a fault.
            Err(e @ Error::Data(_)) => Ok((
                TuneTrial {
                    index: i,
                    params,
                    val_f1: 0.0,
                    error: Some(e.to_string()),
                },
                None,
            )),
            Err(e) => Err(e),
        }
    };
    let results: Vec<(TuneTrial, Option<EnsembleModel>)> = if config.jobs == 1 {
        (0..config.n_trials).map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.n_trials).into_par_iter().map(run).collect::<Result<_>>())?
    };
    let best = results
        .iter()
        .filter(|(_, m)| m.is_some())
        .max_by(|a, b| a.0.val_f1.total_cmp(&b.0.val_f1).then(b.0.index.cmp(&a.0.index)))
        .map(|(t, _)| t.index)
        .ok_or_else(|| Error::Data("every tuning trial failed to train".into()))?;
    let mut trials = Vec::with_capacity(results.len());
    let mut model = None;
    for (t, m) in results {
        if t.index == best {
            model = m;
        }
        trials.push(t);
    }
    Ok(TuneOutcome {
        trials,
        best,
        model: model.expect("best trial has a model"),
    })
}
