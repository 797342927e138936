//! Big-O operation-count estimates for convolutional and recurrent stacks.

use serde::{Deserialize, Serialize};

use super::descriptor::{ArchitectureSpec, LayerDescriptor};
use super::shape::{layer_output_shape, FeatureShape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostEstimate {
    /// Sum over convolution layers of filters x kernel x input channels x output length.
    pub conv_cost: u64,
    /// Sum over recurrent layers of units x (sequence length + units).
    pub gru_cost: u64,
}

impl CostEstimate {
    pub fn total(&self) -> u64 {
        self.conv_cost + self.gru_cost
    }
}

pub fn cost_estimate(spec: &ArchitectureSpec, input: FeatureShape) -> Result<CostEstimate> {
    let mut cost = CostEstimate::default();
    let mut shape = input;
    for (i, layer) in spec.layers.iter().enumerate() {
        let out = layer_output_shape(layer, shape).map_err(|reason| Error::UnresolvableShape { layer: i, reason })?;
        match (*layer, shape, out) {
            (
                LayerDescriptor::Conv1d { filters, kernel, .. },
                FeatureShape::Seq { channels, .. },
                FeatureShape::Seq { len: m, .. },
            ) => {
                cost.conv_cost += (filters * kernel * channels * m) as u64;
            }
            (LayerDescriptor::Gru { units }, FeatureShape::Seq { len, .. }, _) => {
                cost.gru_cost += (units * (len + units)) as u64;
            }
            _ => {}
        }
        shape = out;
    }
    Ok(cost)
}
