use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{DatasetSource, ExperimentConfig, Precision};
use super::{Cli, Command, FormatArg, RunArgs};
use crate::baselines::{self, TuneConfig};
use crate::data::{
    generate_synthetic, load_csv, plan_splits, splits::designated_windows, write_csv, SplitPlan, SyntheticConfig,
    TimeSeriesDataset,
};
use crate::error::{Error, Result};
use crate::eval::{build_report_with, read_results_csv, results_csv, ParticipantResult};
use crate::io::{write_atomic, write_atomic_str};
use crate::nas::{evaluate_trial, run_search, write_trial_log, SearchData, SearchOutcome};
use crate::nn::{load_model, save_model, ExportFormat, Model, MAGIC};
use crate::prune::{prune_to_fit, FineTuneConfig, PrunedModel};
use crate::seed;
use crate::space::{text, Pipeline};
use crate::tensor::Real;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            out,
            seed,
            participants,
            amputees,
            imbalance_ratio,
            duration_s,
            separable,
        } => {
            let mut synth = match config {
                Some(path) => match ExperimentConfig::load(&path)?.dataset {
                    DatasetSource::Synthetic(s) => s,
                    DatasetSource::Csv { .. } => {
                        return Err(Error::Config("generate needs a synthetic [dataset] section".into()))
                    }
                },
                None => SyntheticConfig::default(),
            };
            if let Some(v) = seed {
                synth.seed = v;
            }
            if let Some(v) = participants {
                synth.participants = v;
            }
            if let Some(v) = amputees {
                synth.amputees = v;
            }
            if let Some(v) = imbalance_ratio {
                synth.imbalance_ratio = v;
            }
            if let Some(v) = duration_s {
                synth.duration_s = v;
            }
            synth.separable |= separable;
            synth.validate()?;
            let ds = generate_synthetic(&synth)?;
            write_csv(&ds, &out)?;
            eprintln!("wrote {} participants to {}", ds.participants.len(), out.display());
            Ok(())
        }
        Command::Search {
            run,
            pipeline,
            budget_kb,
            trials,
        } => {
            let mut exp = Experiment::prepare(&run, "search", |c| {
                if !pipeline.is_empty() {
                    c.search.pipelines = pipeline.clone();
                }
                if let Some(b) = budget_kb {
                    c.search.budget_kb = b;
                }
                if let Some(t) = trials {
                    c.search.n_feasible_trials = t;
                }
            })?;
            exp.for_each_split(|exp, plan| exp.search_split(plan))?;
            exp.finish()
        }
        Command::PruneBaseline {
            run,
            pipeline,
            target_kb,
            trials,
        } => {
            let mut exp = Experiment::prepare(&run, "prune-baseline", |c| {
                if !pipeline.is_empty() {
                    c.search.pipelines = pipeline.clone();
                }
                if let Some(t) = target_kb {
                    c.prune.target_kb = t;
                }
                if let Some(t) = trials {
                    c.search.n_feasible_trials = t;
                }
            })?;
            exp.for_each_split(|exp, plan| exp.prune_split(plan))?;
            exp.finish()
        }
        Command::TrainBaseline { run, kind, trials } => {
            let mut exp = Experiment::prepare(&run, "train-baseline", |c| {
                if !kind.is_empty() {
                    c.baseline.kinds = kind.clone();
                }
                if let Some(t) = trials {
                    c.baseline.n_trials = t;
                }
            })?;
            exp.for_each_split(|exp, plan| exp.baseline_split(plan))?;
            exp.finish()
        }
        Command::Evaluate {
            model,
            data,
            config,
            participants,
            name,
            out,
        } => evaluate(&model, data.as_deref(), config.as_deref(), &participants, name, &out),
        Command::Compare {
            results,
            out,
            levene_center,
        } => {
            let mut rows = Vec::new();
            for path in &results {
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let part = read_results_csv(std::io::BufReader::new(file))
                    .map_err(|e| e.context(format!("reading {}", path.display())))?;
                rows.extend(part);
            }
            let report = build_report_with(&rows, levene_center.into())?;
            create_dir(&out)?;
            report.write(&out)?;
            for flag in &report.flags {
                eprintln!("note: {flag}");
            }
            eprintln!(
                "compared {} models over {} participants; report in {}",
                report.models.len(),
                report.participants.len(),
                out.display()
            );
            Ok(())
        }
        Command::Describe { model } => {
            use std::io::Write as _;
            let text = describe(&model)?;
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
        Command::Export { model, out, format } => {
            let m = load_model::<f32>(&model)?;
            let format = match format {
                FormatArg::Dense => ExportFormat::Dense,
                FormatArg::Sparse => ExportFormat::Sparse,
            };
            save_model(&m, format, &out)?;
            eprintln!("wrote {} ({:?}, {:.2} KB model)", out.display(), format, m.memory_kb());
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json(value: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Data(format!("json: {e}")))
}

pub(crate) fn load_dataset(config: &ExperimentConfig) -> Result<TimeSeriesDataset> {
    match &config.dataset {
        DatasetSource::Synthetic(s) => generate_synthetic(s),
        DatasetSource::Csv { path } => load_csv(path).map_err(|e| e.context(format!("dataset {}", path.display()))),
    }
}

/// Shared state of one experiment command run.
struct Experiment {
    config: ExperimentConfig,
    dataset: TimeSeriesDataset,
    plans: Vec<SplitPlan>,
    selected: Vec<usize>,
    out: PathBuf,
    jobs: usize,
    results: Vec<ParticipantResult>,
    seeds: Vec<serde_json::Value>,
}

impl Experiment {
    /// Resolves the config (file, then flags, then seed override), validates
    /// it and loads data. Nothing is written before validation succeeds.
    fn prepare(args: &RunArgs, command: &str, overrides: impl FnOnce(&mut ExperimentConfig)) -> Result<Self> {
        let mut config = match &args.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        overrides(&mut config);
        if let Some(s) = args.seed {
            config.master_seed = s;
        }
        if let Some(p) = args.precision {
            config.precision = p;
        }
        if let Some(o) = &args.out {
            config.output_dir = o.clone();
        }
        if args.all_splits {
            config.splits.all = true;
        }
        if let Some(i) = args.split {
            config.splits.all = false;
            config.splits.indices = vec![i];
        }
        config.validate()?;
        let dataset = load_dataset(&config)?;
        let plans = plan_splits(&dataset, config.split_config(), config.master_seed)?;
        let selected: Vec<usize> = if config.splits.all {
            (0..plans.len()).collect()
        } else {
            config.splits.indices.clone()
        };
        if let Some(&bad) = selected.iter().find(|&&i| i >= plans.len()) {
            return Err(Error::Config(format!(
                "split index {bad} out of range (0..{})",
                plans.len()
            )));
        }
        let out = config.output_dir.clone();
        create_dir(&out)?;
        write_atomic_str(&out.join("config.toml"), &config.to_toml()?)?;
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "jobs": args.jobs,
            "precision": config.precision,
        });
        write_atomic_str(&out.join("run.json"), &to_json(&meta)?)?;
        Ok(Self {
            config,
            dataset,
            plans,
            selected,
            out,
            jobs: args.jobs,
            results: Vec::new(),
            seeds: Vec::new(),
        })
    }

    fn for_each_split(&mut self, mut f: impl FnMut(&mut Self, &SplitPlan) -> Result<()>) -> Result<()> {
        for i in self.selected.clone() {
            let plan = self.plans[i].clone();
            eprintln!("split {i}: test participant {}", plan.test_participant);
            f(self, &plan).map_err(|e| e.context(format!("split {i} (test participant {})", plan.test_participant)))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        write_atomic(&self.out.join("results.csv"), &results_csv(&self.results)?)?;
        let seeds = json!({ "master_seed": self.config.master_seed, "splits": self.seeds });
        write_atomic_str(&self.out.join("seeds.json"), &to_json(&seeds)?)?;
        eprintln!("outputs in {}", self.out.display());
        Ok(())
    }

    fn split_dir(&self, plan: &SplitPlan, name: &str) -> Result<PathBuf> {
        let dir = self.out.join(format!("split_{:03}", plan.index)).join(name);
        create_dir(&dir)?;
        Ok(dir)
    }

    fn search_data(&self, plan: &SplitPlan, seed_value: u64) -> Result<(SearchData, crate::data::WindowSet)> {
        let w = plan.windows(&self.dataset, self.config.window_config())?;
        let data = SearchData::new(w.train, w.validation, self.config.search.max_train_windows, seed_value)?;
        Ok((data, w.test))
    }

    fn search_split(&mut self, plan: &SplitPlan) -> Result<()> {
        for pipeline in self.config.search.pipelines.clone() {
            let seed_value = seed::derive_labeled(plan.seed, &format!("search-{pipeline}"));
            self.seeds
                .push(json!({ "split": plan.index, "stage": format!("search-{pipeline}"), "seed": seed_value }));
            let (data, test) = self.search_data(plan, seed_value)?;
            let config = self.config.search_config(pipeline, seed_value, self.jobs);
            let dir = self.split_dir(plan, &format!("nas-{pipeline}"))?;
            let row = match self.config.precision {
                Precision::F32 => finish_search::<f32>(run_search(&config, &data)?, &dir, &test, plan, pipeline)?,
                Precision::F64 => finish_search::<f64>(run_search(&config, &data)?, &dir, &test, plan, pipeline)?,
            };
            self.results.push(row);
        }
        Ok(())
    }

    fn prune_split(&mut self, plan: &SplitPlan) -> Result<()> {
        for pipeline in self.config.search.pipelines.clone() {
            let seed_value = seed::derive_labeled(plan.seed, &format!("prune-{pipeline}"));
            self.seeds
                .push(json!({ "split": plan.index, "stage": format!("prune-{pipeline}"), "seed": seed_value }));
            let (data, test) = self.search_data(plan, seed_value)?;
            let mut config = self.config.search_config(pipeline, seed_value, self.jobs);
            config.budget_kb = self.config.prune.relaxed_budget_kb;
            let dir = self.split_dir(plan, &format!("pruned-{pipeline}"))?;
            let row = match self.config.precision {
                Precision::F32 => {
                    self.finish_prune::<f32>(run_search(&config, &data)?, &data, &dir, &test, plan, pipeline)?
                }
                Precision::F64 => {
                    self.finish_prune::<f64>(run_search(&config, &data)?, &data, &dir, &test, plan, pipeline)?
                }
            };
            self.results.push(row);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_prune<T: Real>(
        &self,
        stage1: SearchOutcome<T>,
        data: &SearchData,
        dir: &Path,
        test: &crate::data::WindowSet,
        plan: &SplitPlan,
        pipeline: Pipeline,
    ) -> Result<ParticipantResult> {
        write_trial_log(&stage1.log(), &dir.join("stage1_trial_log.csv"))?;
        let best = stage1.into_best();
        save_model(&best.model, ExportFormat::Dense, &dir.join("stage1.mnas"))?;
        let fine_tune = FineTuneConfig {
            learning_rate: best.hyperparameters.learning_rate,
            lasso_lambda: best.hyperparameters.lasso_lambda,
            batch_size: self.config.search.batch_size,
            epochs: self.config.prune.fine_tune_epochs,
            patience: self.config.prune.fine_tune_patience,
            seed: seed::derive_labeled(plan.seed, &format!("fine-tune-{pipeline}")),
        };
        let target = self.config.prune.target_kb;
        let pruned: PrunedModel<T> =
            prune_to_fit(&best.model, target, &self.config.prune_schedule(0.5), &fine_tune, data)?;
        save_model(&pruned.model, ExportFormat::Sparse, &dir.join("model.mnas"))?;
        let (metrics, counts) = evaluate_trial(&pruned.model, test)?;
        let summary = json!({
            "stage1": {
                "trial": best.index,
                "memory_kb": best.memory.kilobytes,
                "val_f1": best.val_f1,
                "spec": best.spec,
                "hyperparameters": best.hyperparameters,
            },
            "pruned": {
                "target_kb": target,
                "final_sparsity": pruned.final_sparsity,
                "achieved_sparsity": pruned.achieved_sparsity,
                "nonzero_params": pruned.nonzero_params,
                "memory_kb": pruned.memory_kb,
                "iterations": pruned.iterations,
                "val_f1": pruned.val_f1,
                "ramp": pruned.ramp,
            },
            "test": { "participant": plan.test_participant, "metrics": metrics, "counts": counts },
        });
        write_atomic_str(&dir.join("prune.json"), &to_json(&summary)?)?;
        eprintln!(
            "  pruned-{pipeline}: stage 1 {:.2} KB -> {:.2} KB at sparsity {:.3} ({} iterations), test F1 {:.4}",
            best.memory.kilobytes, pruned.memory_kb, pruned.achieved_sparsity, pruned.iterations, metrics.f1
        );
        Ok(ParticipantResult {
            participant: plan.test_participant.clone(),
            model: format!("pruned-{pipeline}"),
            metrics,
            memory_kb: pruned.memory_kb,
        })
    }

    fn baseline_split(&mut self, plan: &SplitPlan) -> Result<()> {
        let train = plan.train_samples(&self.dataset)?;
        let validation = plan.validation_signals(&self.dataset)?;
        let test = plan.test_signal(&self.dataset)?;
        let window = self.config.window_config();
        for kind in self.config.baseline.kinds.clone() {
            let seed_value = seed::derive_labeled(plan.seed, kind.as_str());
            self.seeds
                .push(json!({ "split": plan.index, "stage": kind.as_str(), "seed": seed_value }));
            let b = &self.config.baseline;
            let tune = TuneConfig {
                kind,
                n_trials: b.n_trials,
                n_bags: b.n_bags,
                master_seed: seed_value,
                max_train_samples: b.max_train_samples,
                max_estimators: b.max_estimators,
                jobs: self.jobs,
            };
            let outcome = baselines::tune_ensemble(&tune, &train, &validation, window)?;
            let dir = self.split_dir(plan, kind.as_str())?;
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record([
                "index",
                "n_estimators",
                "max_depth",
                "learning_rate",
                "max_features",
                "val_f1",
                "error",
            ])?;
            for t in &outcome.trials {
                wtr.write_record([
                    t.index.to_string(),
                    t.params.n_estimators.to_string(),
                    t.params.max_depth.to_string(),
                    t.params.learning_rate.to_string(),
                    format!("{:?}", t.params.max_features).to_lowercase(),
                    t.val_f1.to_string(),
                    t.error.clone().unwrap_or_default(),
                ])?;
            }
            let bytes = wtr.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            write_atomic(&dir.join("tuning.csv"), &bytes)?;
            baselines::save_ensemble(&outcome.model, &dir.join("model.mnen"))?;
            let counts = baselines::evaluate_signal(&outcome.model, &test, window)?;
            let metrics = crate::eval::metrics(&counts);
            let memory_kb = ensemble_kb(&outcome.model)?;
            let summary = json!({
                "best_trial": outcome.best,
                "params": outcome.model.params,
                "learners": outcome.model.learners.len(),
                "memory_kb": memory_kb,
                "test": { "participant": plan.test_participant, "metrics": metrics, "counts": counts },
            });
            write_atomic_str(&dir.join("result.json"), &to_json(&summary)?)?;
            eprintln!(
                "  {}: best trial {}, test F1 {:.4}",
                kind.as_str(),
                outcome.best,
                metrics.f1
            );
            self.results.push(ParticipantResult {
                participant: plan.test_participant.clone(),
                model: kind.as_str().to_string(),
                metrics,
                memory_kb,
            });
        }
        Ok(())
    }
}

/// Ensemble footprint: size of its serialised form.
fn ensemble_kb(model: &baselines::EnsembleModel) -> Result<f64> {
    Ok(baselines::ensemble_to_bytes(model)?.len() as f64 / 1024.0)
}

fn finish_search<T: Real>(
    outcome: SearchOutcome<T>,
    dir: &Path,
    test: &crate::data::WindowSet,
    plan: &SplitPlan,
    pipeline: Pipeline,
) -> Result<ParticipantResult> {
    write_trial_log(&outcome.log(), &dir.join("trial_log.csv"))?;
    let trials: Vec<serde_json::Value> = outcome
        .trials
        .iter()
        .map(|t| {
            json!({
                "index": t.index,
                "spec": t.spec,
                "hyperparameters": t.hyperparameters,
                "memory": t.memory,
                "val_f1": t.val_f1,
                "val_counts": t.val_counts,
                "rejected_count": t.rejected_count,
                "history": t.history,
                "diverged": t.diverged,
            })
        })
        .collect();
    write_atomic_str(&dir.join("trials.json"), &to_json(&json!(trials))?)?;
    let calls = outcome.training_calls;
    let best = outcome.into_best();
    save_model(&best.model, ExportFormat::Dense, &dir.join("model.mnas"))?;
    write_atomic_str(
        &dir.join("architecture.txt"),
        &text::summary(&best.spec, best.model.input_shape())?,
    )?;
    let (metrics, counts) = evaluate_trial(&best.model, test)?;
    let summary = json!({
        "best_trial": best.index,
        "memory_kb": best.memory.kilobytes,
        "val_f1": best.val_f1,
        "training_calls": calls,
        "test": { "participant": plan.test_participant, "metrics": metrics, "counts": counts },
    });
    write_atomic_str(&dir.join("result.json"), &to_json(&summary)?)?;
    eprintln!(
        "  nas-{pipeline}: best trial {} ({:.2} KB), val F1 {:.4}, test F1 {:.4}",
        best.index, best.memory.kilobytes, best.val_f1, metrics.f1
    );
    Ok(ParticipantResult {
        participant: plan.test_participant.clone(),
        model: format!("nas-{pipeline}"),
        metrics,
        memory_kb: best.model.memory_kb(),
    })
}

enum Loaded {
    Network(Model<f32>),
    Ensemble(baselines::EnsembleModel),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        Ok(Loaded::Network(load_model::<f32>(path)?))
    } else if bytes.starts_with(baselines::format::MAGIC) {
        Ok(Loaded::Ensemble(baselines::ensemble_from_bytes(&bytes)?))
    } else {
        Err(Error::Format(format!(
            "{} is neither a network nor an ensemble file",
            path.display()
        )))
    }
}

fn describe(path: &Path) -> Result<String> {
    use std::fmt::Write as _;
    let mut out = String::new();
    match load_any(path)? {
        Loaded::Network(m) => {
            out.push_str(&text::format_spec(m.spec(), m.input_shape()));
            out.push('\n');
            out.push_str(&text::summary(m.spec(), m.input_shape())?);
            let _ = write!(
                out,
                "\nNonzero params: {} ({:.2} KB)",
                m.nonzero_params(),
                crate::space::params_to_kb(m.nonzero_params())
            );
        }
        Loaded::Ensemble(e) => {
            let nodes: usize = e.learners.iter().map(|l| l.tree.nodes.len()).sum();
            let _ = writeln!(out, "Ensemble: {}", e.kind.as_str());
            let _ = writeln!(
                out,
                "Params: n_estimators={} max_depth={} learning_rate={} max_features={:?}",
                e.params.n_estimators, e.params.max_depth, e.params.learning_rate, e.params.max_features
            );
            let _ = writeln!(
                out,
                "Bags: {}  Learners: {}  Nodes: {}",
                e.n_bags,
                e.learners.len(),
                nodes
            );
            let _ = write!(out, "Serialised size: {:.2} KB", ensemble_kb(&e)?);
        }
    }
    Ok(out)
}

fn evaluate(
    model_path: &Path,
    data: Option<&Path>,
    config: Option<&Path>,
    participants: &[String],
    name: Option<String>,
    out: &Path,
) -> Result<()> {
    let config = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let dataset = match data {
        Some(p) => load_csv(p)?,
        None => load_dataset(&config)?,
    };
    let model = load_any(model_path)?;
    let name = name.unwrap_or_else(|| {
        model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    let ids: Vec<String> = if participants.is_empty() {
        dataset.participants.iter().map(|p| p.id.clone()).collect()
    } else {
        participants.to_vec()
    };
    let window = config.window_config();
    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let p = dataset
            .participant(id)
            .ok_or_else(|| Error::Data(format!("participant `{id}` not in dataset")))?;
        let (metrics, memory_kb) = match &model {
            Loaded::Network(m) => (evaluate_trial(m, &designated_windows(p, window)?)?.0, m.memory_kb()),
            Loaded::Ensemble(e) => {
                let s = p.designated_sensor();
                let signal = crate::data::SampleSet {
                    samples: s.samples.clone(),
                    labels: s.labels.clone(),
                };
                (
                    crate::eval::metrics(&baselines::evaluate_signal(e, &signal, window)?),
                    ensemble_kb(e)?,
                )
            }
        };
        rows.push(ParticipantResult {
            participant: id.clone(),
            model: name.clone(),
            metrics,
            memory_kb,
        });
    }
    write_atomic(out, &results_csv(&rows)?)?;
    eprintln!("evaluated `{name}` on {} participants -> {}", rows.len(), out.display());
    Ok(())
}
