//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{EnsembleKind, DEFAULT_BAGS};
use crate::data::{SplitConfig, SyntheticConfig, WindowConfig};
use crate::error::{Error, Result};
use crate::nas::SearchConfig;
use crate::prune::{FineTuneConfig, PruneSchedule, RELAXED_BUDGET_KB};
use crate::space::{Pipeline, DEFAULT_BUDGET_KB};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Where the recordings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    /// `path` is resolved against the config file's directory.
    Csv {
        path: PathBuf,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub length: usize,
    pub overlap: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        Self {
            length: w.length,
            overlap: w.overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitsSection {
    pub val_amputees: usize,
    pub val_controls: usize,
    /// Split plans to run (index = position in participant order).
    pub indices: Vec<usize>,
    /// Runs every leave-one-participant-out split; overrides `indices`.
    pub all: bool,
}

impl Default for SplitsSection {
    fn default() -> Self {
        let s = SplitConfig::default();
        Self {
            val_amputees: s.val_amputees,
            val_controls: s.val_controls,
            indices: vec![0],
            all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub pipelines: Vec<Pipeline>,
    pub budget_kb: f64,
    pub n_feasible_trials: usize,
    pub max_rejections_per_trial: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub max_train_windows: Option<usize>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            pipelines: vec![Pipeline::Cnn],
            budget_kb: DEFAULT_BUDGET_KB,
            n_feasible_trials: s.n_feasible_trials,
            max_rejections_per_trial: s.max_rejections_per_trial,
            batch_size: s.batch_size,
            max_epochs: s.max_epochs,
            patience: s.patience,
            max_train_windows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneSection {
    pub target_kb: f64,
    pub relaxed_budget_kb: f64,
    pub initial_sparsity: f64,
    pub ramp_epochs: usize,
    pub step_increment: f64,
    pub fine_tune_epochs: usize,
    pub fine_tune_patience: usize,
}

impl Default for PruneSection {
    fn default() -> Self {
        let s = PruneSchedule::default();
        let f = FineTuneConfig::default();
        Self {
            target_kb: DEFAULT_BUDGET_KB,
            relaxed_budget_kb: RELAXED_BUDGET_KB,
            initial_sparsity: s.initial_sparsity,
            ramp_epochs: s.ramp_epochs,
            step_increment: s.step_increment,
            fine_tune_epochs: f.epochs,
            fine_tune_patience: f.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub kinds: Vec<EnsembleKind>,
    pub n_trials: usize,
    pub n_bags: usize,
    pub max_train_samples: Option<usize>,
    pub max_estimators: Option<usize>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            kinds: vec![EnsembleKind::RusBoost],
            n_trials: 20,
            n_bags: DEFAULT_BAGS,
            max_train_samples: None,
            max_estimators: None,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub splits: SplitsSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub prune: PruneSection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 0,
            output_dir: default_output_dir(),
            precision: Precision::default(),
            dataset: DatasetSource::default(),
            window: WindowSection::default(),
            splits: SplitsSection::default(),
            search: SearchSection::default(),
            prune: PruneSection::default(),
            baseline: BaselineSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config; a relative CSV path becomes relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))?;
        if let DatasetSource::Csv { path: data } = &mut config.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialising config: {e}")))
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            length: self.window.length,
            overlap: self.window.overlap,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            val_amputees: self.splits.val_amputees,
            val_controls: self.splits.val_controls,
        }
    }

    /// Search settings for one pipeline; seed and jobs are filled by the caller.
    pub fn search_config(&self, pipeline: Pipeline, master_seed: u64, jobs: usize) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            pipeline,
            budget_kb: s.budget_kb,
            n_feasible_trials: s.n_feasible_trials,
            master_seed,
            max_rejections_per_trial: s.max_rejections_per_trial,
            batch_size: s.batch_size,
            max_epochs: s.max_epochs,
            patience: s.patience,
            max_train_windows: s.max_train_windows,
            jobs,
        }
    }

    pub fn prune_schedule(&self, final_sparsity: f64) -> PruneSchedule {
        PruneSchedule {
            initial_sparsity: self.prune.initial_sparsity,
            final_sparsity,
            ramp_epochs: self.prune.ramp_epochs,
            step_increment: self.prune.step_increment,
        }
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        self.window_config()
            .stride()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !self.splits.all && self.splits.indices.is_empty() {
            return Err(Error::Config("splits.indices is empty and splits.all is false".into()));
        }
        if self.search.pipelines.is_empty() {
            return Err(Error::Config("search.pipelines must name at least one pipeline".into()));
        }
        self.search_config(Pipeline::Cnn, 0, 1).validate()?;
        let p = &self.prune;
        if !(p.target_kb > 0.0 && p.relaxed_budget_kb >= p.target_kb && p.relaxed_budget_kb.is_finite()) {
            return Err(Error::Config("prune needs 0 < target_kb <= relaxed_budget_kb".into()));
        }
        self.prune_schedule(0.5)
            .validate()
            .map_err(|e| Error::Config(format!("prune schedule: {e}")))?;
        if p.fine_tune_epochs == 0 || p.fine_tune_patience == 0 {
            return Err(Error::Config("fine-tune epochs and patience must be positive".into()));
        }
        let b = &self.baseline;
        if b.kinds.is_empty() || b.n_trials == 0 || b.n_bags == 0 {
            return Err(Error::Config(
                "baseline needs kinds, n_trials >= 1 and n_bags >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_toml("schema_version = 1").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.search.max_train_windows = Some(300);
        c.dataset = DatasetSource::Csv { path: "x.csv".into() };
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn synthetic_section_parses() {
        let c = ExperimentConfig::from_toml(
            "schema_version = 1\n[dataset]\nsource = \"synthetic\"\nparticipants = 8\namputees = 2\n",
        )
        .unwrap();
        match c.dataset {
            DatasetSource::Synthetic(s) => assert_eq!((s.participants, s.amputees), (8, 2)),
            _ => panic!("expected synthetic"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "schema_version = 2",
            "schema_version = 1\nbogus = 3",
            "schema_version = 1\n[search]\nbudget_kb = -1.0",
            "schema_version = 1\n[search]\npipelines = []",
            "schema_version = 1\n[dataset]\nsource = \"synthetic\"\nparticipants = 0",
            "schema_version = 1\n[dataset]\nsource = \"synthetic\"\nnot_a_field = 0",
            "schema_version = 1\n[window]\noverlap = 1.0",
            "schema_version = 1\n[prune]\ntarget_kb = 5000.0",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(err.root(), Error::Config(_)), "{text}: {err}");
        }
    }
}
