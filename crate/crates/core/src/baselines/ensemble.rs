//! Boosted tree ensembles for imbalanced per-sample classification.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, MaxFeatures, Tree, TreeConfig};
use crate::data::{Sample, ADL, FALL};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Tuning ranges of the ensemble hyperparameters.
pub const N_ESTIMATORS: (usize, usize) = (10, 250);
pub const MAX_DEPTH: (usize, usize) = (2, 46);
pub const LEARNING_RATE: (f64, f64) = (0.001, 1.0);
/// Bags used by EasyEnsemble when none is given.
pub const DEFAULT_BAGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            max_depth: 4,
            learning_rate: 1.0,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl TreeParams {
    /// Training accepts any positive settings; tuning stays inside the
    /// narrower ranges (see [`TreeParams::in_tuning_range`]).
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 {
            return Err(Error::InvalidArgument(
                "n_estimators and max_depth must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn in_tuning_range(&self) -> bool {
        (N_ESTIMATORS.0..=N_ESTIMATORS.1).contains(&self.n_estimators)
            && (MAX_DEPTH.0..=MAX_DEPTH.1).contains(&self.max_depth)
            && (LEARNING_RATE.0..=LEARNING_RATE.1).contains(&self.learning_rate)
    }

    /// Uniform integers, log-uniform learning rate, uniform feature rule.
    pub fn sample(rng: &mut Rng) -> Self {
        let (lo, hi) = LEARNING_RATE;
        Self {
            n_estimators: rng.gen_range(N_ESTIMATORS.0..=N_ESTIMATORS.1),
            max_depth: rng.gen_range(MAX_DEPTH.0..=MAX_DEPTH.1),
            learning_rate: rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi),
            max_features: MaxFeatures::ALL[rng.gen_range(0..3)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    #[serde(alias = "rus_boost")]
    RusBoost,
    #[serde(alias = "easy_ensemble")]
    EasyEnsemble,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::RusBoost => "rusboost",
            EnsembleKind::EasyEnsemble => "easyensemble",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rusboost" => Ok(EnsembleKind::RusBoost),
            "easyensemble" => Ok(EnsembleKind::EasyEnsemble),
            other => Err(format!(
                "unknown ensemble `{other}` (expected rusboost or easyensemble)"
            )),
        }
    }
}

/// One boosted tree. `bag` groups learners of the same boosting chain;
/// the fitted counts record the class balance the tree was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub bag: u32,
    pub weight: f64,
    pub tree: Tree,
    pub fitted_adl: u32,
    pub fitted_fall: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub params: TreeParams,
    pub n_bags: usize,
    pub learners: Vec<Learner>,
}

impl EnsembleModel {
    /// Fall score in [0, 1]: each chain's weighted vote rescaled from
    /// [-1, 1], averaged over chains.
    pub fn score(&self, x: &Sample) -> f64 {
        let mut sums = vec![(0.0, 0.0); self.n_bags];
        for l in &self.learners {
            let vote = if l.tree.predict(x) == FALL { 1.0 } else { -1.0 };
            let s = &mut sums[l.bag as usize];
            s.0 += l.weight * vote;
            s.1 += l.weight;
        }
        let mut total = 0.0;
        let mut chains = 0;
        for (num, den) in sums {
            if den > 0.0 {
                total += (num / den + 1.0) / 2.0;
                chains += 1;
            }
        }
        if chains == 0 {
            0.0
        } else {
            total / chains as f64
        }
    }

    /// Fall iff the score exceeds one half; ties go to ADL.
    pub fn predict(&self, x: &Sample) -> u8 {
        u8::from(self.score(x) > 0.5)
    }

    pub fn predict_samples(&self, xs: &[Sample]) -> Vec<u8> {
        xs.par_iter().with_min_len(1024).map(|x| self.predict(x)).collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.learners.is_empty() {
            return Err(Error::Format("ensemble has no learners".into()));
        }
        for (i, l) in self.learners.iter().enumerate() {
            if !l.weight.is_finite() {
                return Err(Error::Format(format!("learner {i} has a non-finite weight")));
            }
            if l.bag as usize >= self.n_bags {
                return Err(Error::Format(format!("learner {i} belongs to missing bag {}", l.bag)));
            }
            l.tree.check().map_err(|e| Error::Format(format!("learner {i}: {e}")))?;
        }
        Ok(())
    }
}

fn check_inputs(x: &[Sample], y: &[u8], params: &TreeParams) -> Result<()> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} samples but {} labels", x.len(), y.len())));
    }
    if let Some(bad) = y.iter().find(|&&l| l != ADL && l != FALL) {
        return Err(Error::Data(format!("label {bad} is neither 0 nor 1")));
    }
    let falls = y.iter().filter(|&&l| l == FALL).count();
    if falls == 0 || falls == y.len() {
        return Err(Error::Data("ensemble training needs samples of both classes".into()));
    }
    Ok(())
}

/// Splits `rows` by class and returns (minority, majority).
fn by_class(rows: &[usize], y: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let (fall, adl): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| y[r] == FALL);
    if fall.len() <= adl.len() {
        (fall, adl)
    } else {
        (adl, fall)
    }
}

/// Keeps every minority row and `minority.len()` majority rows, drawn
/// without replacement with probability proportional to `w`. When the
/// classes are already balanced nothing is removed. Output is sorted.
pub fn undersample(rows: &[usize], y: &[u8], w: &[f64], rng: &mut Rng) -> Vec<usize> {
    let (minority, majority) = by_class(rows, y);
    let mut keep = minority.clone();
    if majority.len() <= minority.len() {
        keep.extend(&majority);
    } else {
        // Exponential-key weighted sampling: largest ln(u)/w wins.
        let mut keyed: Vec<(f64, usize)> = majority
            .iter()
            .map(|&r| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let key = if w[r] > 0.0 { u.ln() / w[r] } else { f64::NEG_INFINITY };
                (key, r)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        keep.extend(keyed.iter().take(minority.len()).map(|&(_, r)| r));
    }
    keep.sort_unstable();
    keep
}

/// Uniform majority draw for one EasyEnsemble bag. Output is sorted.
fn balanced_bag(rows: &[usize], y: &[u8], rng: &mut Rng) -> Vec<usize> {
    let (minority, majority) = by_class(rows, y);
    let mut keep = minority.clone();
    let picked = rand::seq::index::sample(rng, majority.len(), minority.len().min(majority.len()));
    keep.extend(picked.into_iter().map(|i| majority[i]));
    keep.sort_unstable();
    keep
}

/// Discrete two-class AdaBoost over `rows`, optionally undersampling the
/// majority class before each fit. Errors and weight updates always use
/// every row of the chain.
#[allow(clippy::too_many_arguments)]
fn boost_chain(
    x: &[Sample],
    y: &[u8],
    rows: &[usize],
    rounds: usize,
    params: &TreeParams,
    chain_seed: u64,
    resample: bool,
    bag: u32,
) -> Result<Vec<Learner>> {
    let mut w = vec![0.0; x.len()];
    let uniform = 1.0 / rows.len() as f64;
    for &r in rows {
        w[r] = uniform;
    }
    let tree_seed = seed::derive_labeled(chain_seed, "tree");
    let sample_seed = seed::derive_labeled(chain_seed, "sample");
    let config = TreeConfig {
        max_depth: params.max_depth,
        max_features: params.max_features,
    };
    let mut learners = Vec::with_capacity(rounds);
    for m in 0..rounds as u64 {
        let fitted = if resample {
            undersample(rows, y, &w, &mut seed::rng(seed::derive(sample_seed, m)))
        } else {
            rows.to_vec()
        };
        let fall = fitted.iter().filter(|&&r| y[r] == FALL).count();
        let tree = fit_tree(x, y, &w, &fitted, config, &mut seed::rng(seed::derive(tree_seed, m)));
        let wrong: Vec<bool> = rows.iter().map(|&r| tree.predict(&x[r]) != y[r]).collect();
        let total: f64 = rows.iter().map(|&r| w[r]).sum();
        let err: f64 = rows
            .iter()
            .zip(&wrong)
            .filter(|(_, &bad)| bad)
            .map(|(&r, _)| w[r])
            .sum::<f64>()
            / total;
        let mut learner = Learner {
            bag,
            weight: 1.0,
            tree,
            fitted_adl: (fitted.len() - fall) as u32,
            fitted_fall: fall as u32,
        };
        if err <= 0.0 {
            learners.push(learner);
            break;
        }
        if err >= 0.5 {
            if learners.is_empty() {
                return Err(Error::Data(format!(
                    "first boosting round is no better than chance (weighted error {err:.4})"
                )));
            }
            break;
        }
        let alpha = params.learning_rate * ((1.0 - err) / err).ln();
        learner.weight = alpha;
        learners.push(learner);
        let boost = alpha.exp();
        let mut norm = 0.0;
        for (&r, &bad) in rows.iter().zip(&wrong) {
            if bad {
                w[r] *= boost;
            }
            norm += w[r];
        }
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::NonFinite("boosting sample weights".into()));
        }
        for &r in rows {
            w[r] /= norm;
        }
    }
    Ok(learners)
}

/// Plain AdaBoost on every row; the reference RUSBoost reduces to on
/// balanced input.
pub fn train_adaboost(x: &[Sample], y: &[u8], params: &TreeParams, seed: u64) -> Result<EnsembleModel> {
    check_inputs(x, y, params)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let learners = boost_chain(x, y, &rows, params.n_estimators, params, seed, false, 0)?;
    Ok(EnsembleModel {
        kind: EnsembleKind::RusBoost,
        params: *params,
        n_bags: 1,
        learners,
    })
}

/// AdaBoost whose every round fits on a class-balanced undersample drawn
/// according to the current boosting weights.
pub fn train_rusboost(x: &[Sample], y: &[u8], params: &TreeParams, seed: u64) -> Result<EnsembleModel> {
    check_inputs(x, y, params)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    let learners = boost_chain(x, y, &rows, params.n_estimators, params, seed, true, 0)?;
    Ok(EnsembleModel {
        kind: EnsembleKind::RusBoost,
        params: *params,
        n_bags: 1,
        learners,
    })
}

/// Independent balanced bags, each boosted separately. The estimator
/// budget is shared: `min(n_bags, n_estimators)` bags of
/// `n_estimators / bags` rounds.
pub fn train_easyensemble(
    x: &[Sample],
    y: &[u8],
    params: &TreeParams,
    n_bags: usize,
    seed: u64,
) -> Result<EnsembleModel> {
    check_inputs(x, y, params)?;
    if n_bags == 0 {
        return Err(Error::InvalidArgument("n_bags must be positive".into()));
    }
    let bags = n_bags.min(params.n_estimators);
    let rounds = params.n_estimators / bags;
    let all: Vec<usize> = (0..x.len()).collect();
    let chains: Vec<Vec<Learner>> = (0..bags)
        .into_par_iter()
        .map(|b| {
            let bag_seed = seed::derive(seed, b as u64);
            let rows = balanced_bag(&all, y, &mut seed::rng(seed::derive_labeled(bag_seed, "bag")));
            boost_chain(x, y, &rows, rounds, params, bag_seed, false, b as u32)
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleModel {
        kind: EnsembleKind::EasyEnsemble,
        params: *params,
        n_bags: bags,
        learners: chains.into_iter().flatten().collect(),
    })
}

/// Majority-class draws of the bags `train_easyensemble` would use.
pub fn easyensemble_bags(y: &[u8], n_bags: usize, seed: u64) -> Vec<Vec<usize>> {
    let all: Vec<usize> = (0..y.len()).collect();
    (0..n_bags)
        .map(|b| {
            let bag_seed = seed::derive(seed, b as u64);
            balanced_bag(&all, y, &mut seed::rng(seed::derive_labeled(bag_seed, "bag")))
        })
        .collect()
}
