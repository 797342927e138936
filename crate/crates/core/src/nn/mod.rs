//! Neural network engine: layers, loss, optimizer, training and export.

pub mod activation;
pub mod adam;
pub mod export;
pub mod layer;
pub mod loss;
pub mod model;
pub mod train;

pub use adam::Adam;
pub use export::{load_model, load_model_from, save_model, save_model_to, ExportFormat, MAGIC};
pub use layer::{Layer, Param};
pub use loss::{logit_gradient, weighted_bce};
pub use model::{Gradients, Model, Tape};
pub use train::{evaluate_loss, predict_windows, run_epoch, train, EarlyStopping, History, StopDecision, TrainConfig};
