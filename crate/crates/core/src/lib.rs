pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod nas;
pub mod nn;
pub mod prune;
pub mod seed;
pub mod space;
pub mod tensor;

pub use error::{Error, Result};
