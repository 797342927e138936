//! Architecture search space: layer grammar, sampling, exact parameter
//! counting, memory budgeting and operation-count estimates.

pub mod cost;
pub mod descriptor;
pub mod grammar;
pub mod reference;
pub mod sample;
pub mod shape;
pub mod text;

pub use cost::{cost_estimate, CostEstimate};
pub use descriptor::{Activation, ArchitectureSpec, Hyperparameters, LayerDescriptor, Padding, Pipeline, PoolKind};
pub use grammar::validate;
pub use reference::{reference_cnn, reference_gru};
pub use sample::sample_architecture;
pub use shape::{fits_budget, param_count, params_to_kb, resolve_shapes, FeatureShape, MemoryEstimate};

/// Runtime memory of the target microcontroller, in KB.
pub const DEFAULT_BUDGET_KB: f64 = 320.0;

/// Input window: 120 samples of 6 IMU channels.
pub const WINDOW_SHAPE: FeatureShape = FeatureShape::Seq { len: 120, channels: 6 };
