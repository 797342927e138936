//! Two-stage baseline: search under a relaxed memory cap, then prune by
//! weight magnitude until the model fits the target budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nas::{evaluate_trial, run_search, SearchConfig, SearchData, SearchOutcome};
use crate::nn::{run_epoch, train, Adam, Model, TrainConfig};
use crate::seed;
use crate::space::params_to_kb;
use crate::tensor::Real;

/// Memory cap of the unconstrained first stage, in KB.
pub const RELAXED_BUDGET_KB: f64 = 2400.0;
/// Highest final sparsity the fitting loop will try.
pub const MAX_SPARSITY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    pub initial_sparsity: f64,
    pub final_sparsity: f64,
    pub ramp_epochs: usize,
    pub step_increment: f64,
}

impl Default for PruneSchedule {
    fn default() -> Self {
        Self {
            initial_sparsity: 0.0,
            final_sparsity: 0.5,
            ramp_epochs: 10,
            step_increment: 0.10,
        }
    }
}

impl PruneSchedule {
    /// `initial = final = 0` is accepted as the no-op schedule.
    pub fn validate(&self) -> Result<()> {
        let (si, sf) = (self.initial_sparsity, self.final_sparsity);
        if !(0.0..1.0).contains(&si) {
            return Err(Error::InvalidArgument(format!("initial sparsity {si} outside [0, 1)")));
        }
        if !(0.0..1.0).contains(&sf) {
            return Err(Error::InvalidArgument(format!("final sparsity {sf} outside [0, 1)")));
        }
        if sf > 0.0 && si >= sf {
            return Err(Error::InvalidArgument(format!(
                "initial sparsity {si} must be below final sparsity {sf}"
            )));
        }
        if self.ramp_epochs == 0 {
            return Err(Error::InvalidArgument("ramp_epochs must be positive".into()));
        }
        if self.step_increment.is_nan() || self.step_increment <= 0.0 {
            return Err(Error::InvalidArgument("step_increment must be positive".into()));
        }
        Ok(())
    }

    pub fn is_noop(&self) -> bool {
        self.final_sparsity == 0.0
    }

    /// Target sparsity after ramp step `t` of `ramp_epochs` (cubic decay
    /// from initial to final).
    pub fn sparsity_at(&self, t: usize) -> f64 {
        let frac = (t.min(self.ramp_epochs) as f64) / self.ramp_epochs as f64;
        self.final_sparsity + (self.initial_sparsity - self.final_sparsity) * (1.0 - frac).powi(3)
    }
}

/// Optimiser settings for the ramp and the fine-tuning that follows it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
    pub lasso_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lasso_lambda: 1e-4,
            batch_size: 916,
            epochs: 20,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrunedModel<T> {
    pub model: Model<T>,
    /// Masked fraction of prunable weights.
    pub achieved_sparsity: f64,
    /// Nonzero parameters across the whole model.
    pub nonzero_params: usize,
    pub memory_kb: f64,
    /// Final sparsity of the schedule that produced this model.
    pub final_sparsity: f64,
    /// Sparsity-loop iterations used by [`prune_to_fit`]; 1 for a single prune.
    pub iterations: usize,
    /// Validation fall-class F1 after fine-tuning.
    pub val_f1: f64,
    /// Achieved sparsity after each ramp step.
    pub ramp: Vec<f64>,
}

impl<T: Real> PrunedModel<T> {
    fn from_model(model: Model<T>, final_sparsity: f64, iterations: usize, val_f1: f64, ramp: Vec<f64>) -> Self {
        let nonzero_params = model.nonzero_params();
        Self {
            achieved_sparsity: masked_fraction(&model),
            nonzero_params,
            memory_kb: params_to_kb(nonzero_params),
            final_sparsity,
            iterations,
            val_f1,
            ramp,
            model,
        }
    }
}

/// Number of prunable weights in the model.
pub fn prunable_count<T: Real>(model: &Model<T>) -> usize {
    model
        .layers()
        .iter()
        .flat_map(|l| &l.params)
        .filter(|p| p.prunable)
        .map(|p| p.value.len())
        .sum()
}

/// Fraction of prunable weights currently masked.
pub fn masked_fraction<T: Real>(model: &Model<T>) -> f64 {
    let total = prunable_count(model);
    if total == 0 {
        return 0.0;
    }
    let masked: usize = model
        .layers()
        .iter()
        .flat_map(|l| &l.params)
        .filter(|p| p.prunable)
        .map(|p| p.masked_count())
        .sum();
    masked as f64 / total as f64
}

/// Masks the `ceil(sparsity × N)` smallest-magnitude prunable weights,
/// ranked globally across layers. Existing masks are kept, so sparsity
/// never decreases. Returns the achieved sparsity.
pub fn apply_sparsity<T: Real>(model: &mut Model<T>, sparsity: f64) -> f64 {
    let total = prunable_count(model);
    if total == 0 {
        return 0.0;
    }
    let target = ((sparsity * total as f64) - 1e-9).ceil().max(0.0) as usize;
    // (magnitude, layer, param, offset); already-masked entries rank first.
    let mut ranking: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(total);
    for (li, layer) in model.layers().iter().enumerate() {
        for (pi, p) in layer.params.iter().enumerate().filter(|(_, p)| p.prunable) {
            for (k, v) in p.value.data().iter().enumerate() {
                let masked = p.mask.as_ref().is_some_and(|m| !m[k]);
                let mag = if masked { -1.0 } else { v.to_f64_lossy().abs() };
                ranking.push((mag, li, pi, k));
            }
        }
    }
    ranking.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    let layers = model.layers_mut();
    for &(_, li, pi, k) in ranking.iter().take(target.min(total)) {
        let p = &mut layers[li].params[pi];
        let len = p.value.len();
        p.mask.get_or_insert_with(|| vec![true; len])[k] = false;
    }
    model.apply_masks();
    masked_fraction(model)
}

fn train_config(ft: &FineTuneConfig, data: &SearchData, epochs: usize, patience: usize, label: &str) -> TrainConfig {
    TrainConfig {
        learning_rate: ft.learning_rate,
        batch_size: ft.batch_size,
        max_epochs: epochs,
        patience,
        lasso_lambda: ft.lasso_lambda,
        class_weights: data.class_weights,
        seed: seed::derive_labeled(ft.seed, label),
    }
}

/// Ramps sparsity across `ramp_epochs` training epochs, masking at the start
/// of each, then fine-tunes with masks frozen and early stopping.
pub fn magnitude_prune<T: Real>(
    model: &Model<T>,
    schedule: &PruneSchedule,
    fine_tune: &FineTuneConfig,
    data: &SearchData,
) -> Result<PrunedModel<T>> {
    schedule.validate()?;
    if data.train.fall_count() == 0 {
        return Err(Error::NoFallWindows);
    }
    let mut model = model.clone();
    if schedule.is_noop() {
        let (m, _) = evaluate_trial(&model, &data.validation)?;
        return Ok(PrunedModel::from_model(model, 0.0, 1, m.f1, Vec::new()));
    }
    let ramp_config = train_config(fine_tune, data, schedule.ramp_epochs, 1, "ramp");
    ramp_config.validate()?;
    let mut adam = Adam::new(&model, ramp_config.learning_rate);
    let mut rng = seed::rng(ramp_config.seed);
    let mut order = Vec::new();
    let mut ramp = Vec::with_capacity(schedule.ramp_epochs);
    for t in 1..=schedule.ramp_epochs {
        ramp.push(apply_sparsity(&mut model, schedule.sparsity_at(t)));
        run_epoch(&mut model, &mut adam, &data.train, &ramp_config, &mut order, &mut rng)?;
    }
    let ft = train_config(
        fine_tune,
        data,
        fine_tune.epochs,
        fine_tune.patience.min(fine_tune.epochs),
        "fine-tune",
    );
    train(&mut model, &data.train, &data.validation, &ft)?;
    let (m, _) = evaluate_trial(&model, &data.validation)?;
    Ok(PrunedModel::from_model(model, schedule.final_sparsity, 1, m.f1, ramp))
}

/// Smallest final sparsity whose mask count alone brings the nonzero
/// parameter count to `target_kb`, assuming every other weight is nonzero.
pub fn minimum_sparsity<T: Real>(model: &Model<T>, target_kb: f64) -> Result<f64> {
    let total = model.param_count();
    let prunable = prunable_count(model);
    let fixed = total - prunable;
    let allowed = (target_kb * 1024.0 / 4.0).floor() as usize;
    if allowed < fixed || prunable == 0 {
        return Err(Error::UnreachableTarget {
            target_kb,
            reason: format!("{fixed} non-prunable parameters already exceed {allowed}"),
        });
    }
    let must_mask = total.saturating_sub(allowed);
    Ok(must_mask as f64 / prunable as f64)
}

/// Starts at the minimum sparsity implied by `target_kb` and raises the
/// final sparsity by the schedule's increment until the pruned, fine-tuned
/// model fits. Each attempt starts again from `model`.
pub fn prune_to_fit<T: Real>(
    model: &Model<T>,
    target_kb: f64,
    schedule: &PruneSchedule,
    fine_tune: &FineTuneConfig,
    data: &SearchData,
) -> Result<PrunedModel<T>> {
    if model.memory_kb() <= target_kb {
        let (m, _) = evaluate_trial(model, &data.validation)?;
        return Ok(PrunedModel::from_model(model.clone(), 0.0, 0, m.f1, Vec::new()));
    }
    let start = minimum_sparsity(model, target_kb)?;
    if start > MAX_SPARSITY {
        return Err(Error::UnreachableTarget {
            target_kb,
            reason: format!("needs sparsity {start:.4}, above the {MAX_SPARSITY} limit"),
        });
    }
    let mut sparsity = start.max(1e-6);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let attempt = PruneSchedule {
            initial_sparsity: 0.0,
            final_sparsity: sparsity,
            ..*schedule
        };
        let mut pruned = magnitude_prune(model, &attempt, fine_tune, data)?;
        pruned.iterations = iterations;
        if pruned.memory_kb <= target_kb {
            return Ok(pruned);
        }
        if sparsity >= MAX_SPARSITY {
            return Err(Error::UnreachableTarget {
                target_kb,
                reason: format!("{:.2} KB after pruning at sparsity {MAX_SPARSITY}", pruned.memory_kb),
            });
        }
        sparsity = (sparsity + schedule.step_increment).min(MAX_SPARSITY);
    }
}

/// Stage one: the ordinary search with the budget relaxed to
/// [`RELAXED_BUDGET_KB`].
pub fn run_unconstrained_nas<T: Real>(config: &SearchConfig, data: &SearchData) -> Result<SearchOutcome<T>> {
    let relaxed = SearchConfig {
        budget_kb: RELAXED_BUDGET_KB,
        ..config.clone()
    };
    run_search(&relaxed, data)
}
