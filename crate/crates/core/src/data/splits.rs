//! Leave-one-participant-out split planning.

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Group, Participant, Sample, TimeSeriesDataset};
use super::segment::{segment, WindowConfig, WindowSet};
use crate::error::{Error, Result};
use crate::seed;

/// Number of validation participants drawn from each group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub val_amputees: usize,
    pub val_controls: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            val_amputees: 3,
            val_controls: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub index: usize,
    pub test_participant: String,
    pub validation_participants: Vec<String>,
    pub train_participants: Vec<String>,
    pub seed: u64,
}

/// Windows for the three roles of a split.
#[derive(Debug, Clone)]
pub struct SplitWindows {
    pub train: WindowSet,
    pub validation: WindowSet,
    pub test: WindowSet,
}

/// Raw per-sample rows, used by the ensemble baselines.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub labels: Vec<u8>,
}

impl SampleSet {
    fn push_all(&mut self, samples: &[Sample], labels: &[u8]) {
        self.samples.extend_from_slice(samples);
        self.labels.extend_from_slice(labels);
    }
}

/// One plan per participant: that participant is the test set, the
/// validation set is sampled uniformly without replacement from each group
/// of the remaining participants, and everyone else trains.
pub fn plan_splits(dataset: &TimeSeriesDataset, config: SplitConfig, master_seed: u64) -> Result<Vec<SplitPlan>> {
    dataset
        .participants
        .iter()
        .enumerate()
        .map(|(index, test)| {
            let plan_seed = seed::derive(master_seed, index as u64);
            let mut rng = seed::rng(plan_seed);
            let mut draw = |group: Group, count: usize| -> Result<Vec<String>> {
                let pool: Vec<&str> = dataset
                    .participants
                    .iter()
                    .filter(|p| p.group == group && p.id != test.id)
                    .map(|p| p.id.as_str())
                    .collect();
                if pool.len() < count {
                    return Err(Error::InsufficientParticipants(format!(
                        "need {count} {} validation participants besides `{}`, have {}",
                        group.as_str(),
                        test.id,
                        pool.len()
                    )));
                }
                Ok(pool.choose_multiple(&mut rng, count).map(|s| s.to_string()).collect())
            };
            let mut validation = draw(Group::Amputee, config.val_amputees)?;
            validation.extend(draw(Group::Control, config.val_controls)?);
            let train = dataset
                .participants
                .iter()
                .filter(|p| p.id != test.id && !validation.contains(&p.id))
                .map(|p| p.id.clone())
                .collect::<Vec<_>>();
            if train.is_empty() {
                return Err(Error::InsufficientParticipants(format!(
                    "split for `{}` leaves no training participants",
                    test.id
                )));
            }
            Ok(SplitPlan {
                index,
                test_participant: test.id.clone(),
                validation_participants: validation,
                train_participants: train,
                seed: plan_seed,
            })
        })
        .collect()
}

fn lookup<'a>(dataset: &'a TimeSeriesDataset, id: &str) -> Result<&'a Participant> {
    dataset
        .participant(id)
        .ok_or_else(|| Error::Data(format!("participant `{id}` not in dataset")))
}

/// Windows of the designated sensor of one participant.
pub fn designated_windows(participant: &Participant, config: WindowConfig) -> Result<WindowSet> {
    let id: Arc<str> = participant.id.as_str().into();
    let s = participant.designated_sensor();
    Ok(WindowSet::new(
        segment(&s.samples, &s.labels, config, &id)?,
        config.length,
    ))
}

impl SplitPlan {
    /// Training windows come from every sensor of each training participant;
    /// validation and test windows only from the designated sensor.
    pub fn windows(&self, dataset: &TimeSeriesDataset, config: WindowConfig) -> Result<SplitWindows> {
        let mut train = WindowSet::new(Vec::new(), config.length);
        for id in &self.train_participants {
            let p = lookup(dataset, id)?;
            let pid: Arc<str> = p.id.as_str().into();
            for s in &p.sensors {
                train.windows.extend(segment(&s.samples, &s.labels, config, &pid)?);
            }
        }
        let mut validation = WindowSet::new(Vec::new(), config.length);
        for id in &self.validation_participants {
            validation.extend(designated_windows(lookup(dataset, id)?, config)?);
        }
        let test = designated_windows(lookup(dataset, &self.test_participant)?, config)?;
        Ok(SplitWindows {
            train,
            validation,
            test,
        })
    }

    pub fn train_samples(&self, dataset: &TimeSeriesDataset) -> Result<SampleSet> {
        let mut set = SampleSet::default();
        for id in &self.train_participants {
            for s in &lookup(dataset, id)?.sensors {
                set.push_all(&s.samples, &s.labels);
            }
        }
        Ok(set)
    }

    /// Designated-sensor signals of the validation participants, one per participant.
    pub fn validation_signals(&self, dataset: &TimeSeriesDataset) -> Result<Vec<SampleSet>> {
        self.validation_participants
            .iter()
            .map(|id| {
                let s = lookup(dataset, id)?.designated_sensor();
                Ok(SampleSet {
                    samples: s.samples.clone(),
                    labels: s.labels.clone(),
                })
            })
            .collect()
    }

    pub fn test_signal(&self, dataset: &TimeSeriesDataset) -> Result<SampleSet> {
        let s = lookup(dataset, &self.test_participant)?.designated_sensor();
        Ok(SampleSet {
            samples: s.samples.clone(),
            labels: s.labels.clone(),
        })
    }
}
