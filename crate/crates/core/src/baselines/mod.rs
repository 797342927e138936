//! Imbalance-aware tree ensembles evaluated on smoothed per-sample
//! predictions.

pub mod ensemble;
pub mod format;
pub mod smooth;
pub mod tree;
pub mod tune;

pub use ensemble::{
    easyensemble_bags, train_adaboost, train_easyensemble, train_rusboost, undersample, EnsembleKind, EnsembleModel,
    Learner, TreeParams, DEFAULT_BAGS,
};
pub use format::{ensemble_from_bytes, ensemble_to_bytes, load_ensemble, save_ensemble};
pub use smooth::smooth_predictions;
pub use tree::{fit_tree, MaxFeatures, Node, Tree, TreeConfig};
pub use tune::{cap_samples, evaluate_signal, train_ensemble, tune_ensemble, TuneConfig, TuneOutcome, TuneTrial};
