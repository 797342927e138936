#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use micronas::data::{
    generate_synthetic, plan_splits, SplitConfig, SplitWindows, SyntheticConfig, TimeSeriesDataset, WindowConfig,
};

/// A small synthetic cohort: `participants` people, 30 s each.
pub fn small_dataset(participants: usize, separable: bool, seed: u64) -> TimeSeriesDataset {
    generate_synthetic(&SyntheticConfig {
        participants,
        amputees: 2,
        duration_s: 30.0,
        imbalance_ratio: 12.0,
        separable,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// Windows of the first leave-one-out split with one validation
/// participant per group.
pub fn first_split(dataset: &TimeSeriesDataset, seed: u64) -> SplitWindows {
    let config = SplitConfig {
        val_amputees: 1,
        val_controls: 1,
    };
    let plans = plan_splits(dataset, config, seed).unwrap();
    plans[0].windows(dataset, WindowConfig::default()).unwrap()
}
