//! Dataset types, synthetic generation, CSV ingestion, segmentation,
//! class weighting and split planning.

pub mod csvio;
pub mod dataset;
pub mod segment;
pub mod splits;
pub mod synthetic;
pub mod weights;

pub use csvio::{load_csv, write_csv};
pub use dataset::{Group, Participant, Sample, SensorSide, SensorSignal, TimeSeriesDataset, ADL, CHANNELS, FALL};
pub use segment::{segment, window_label, Window, WindowConfig, WindowSet};
pub use splits::{plan_splits, SampleSet, SplitConfig, SplitPlan, SplitWindows};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use weights::{class_weights, ClassWeights};
