//! Symbolic shape propagation and exact parameter counting.

use serde::{Deserialize, Serialize};

use super::descriptor::{ArchitectureSpec, LayerDescriptor, Padding};
use crate::error::{Error, Result};

/// Per-sample activation shape (batch axis excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureShape {
    /// Time-major sequence of `len` steps with `channels` features each.
    Seq {
        len: usize,
        channels: usize,
    },
    Flat(usize),
}

impl FeatureShape {
    pub fn numel(self) -> usize {
        match self {
            FeatureShape::Seq { len, channels } => len * channels,
            FeatureShape::Flat(n) => n,
        }
    }

    /// Trailing (feature) dimension.
    pub fn features(self) -> usize {
        match self {
            FeatureShape::Seq { channels, .. } => channels,
            FeatureShape::Flat(n) => n,
        }
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            FeatureShape::Seq { len, channels } => vec![len, channels],
            FeatureShape::Flat(n) => vec![n],
        }
    }
}

impl std::fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureShape::Seq { len, channels } => write!(f, "None, {len}, {channels}"),
            FeatureShape::Flat(n) => write!(f, "None, {n}"),
        }
    }
}

/// Parameter count and memory footprint of an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub total_params: usize,
    pub trainable_params: usize,
    pub non_trainable_params: usize,
    pub kilobytes: f64,
}

impl MemoryEstimate {
    pub fn from_counts(trainable: usize, non_trainable: usize) -> Self {
        let total = trainable + non_trainable;
        Self {
            total_params: total,
            trainable_params: trainable,
            non_trainable_params: non_trainable,
            kilobytes: params_to_kb(total),
        }
    }
}

/// Four bytes per stored parameter.
pub fn params_to_kb(params: usize) -> f64 {
    params as f64 * 4.0 / 1024.0
}

/// Output length of a 1-D convolution.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    if stride == 0 || kernel == 0 {
        return None;
    }
    let out = match padding {
        Padding::Same => len.div_ceil(stride),
        Padding::Valid => {
            if len < kernel {
                return None;
            }
            (len - kernel) / stride + 1
        }
    };
    (out > 0).then_some(out)
}

/// Left zero-padding for "same" convolution (extra padding goes right).
pub fn same_pad_left(len: usize, kernel: usize, stride: usize) -> usize {
    let out = len.div_ceil(stride);
    let needed = ((out - 1) * stride + kernel).saturating_sub(len);
    needed / 2
}

/// Output shape of a single layer.
pub fn layer_output_shape(layer: &LayerDescriptor, input: FeatureShape) -> Result<FeatureShape, String> {
    use FeatureShape::*;
    match (*layer, input) {
        (LayerDescriptor::BatchNorm, s) => Ok(s),
        (LayerDescriptor::Dropout { .. }, s) => Ok(s),
        (
            LayerDescriptor::Conv1d {
                filters,
                kernel,
                stride,
                padding,
                ..
            },
            Seq { len, .. },
        ) => {
            if filters == 0 {
                return Err("conv with zero filters".into());
            }
            conv_output_len(len, kernel, stride, padding)
                .map(|len| Seq { len, channels: filters })
                .ok_or_else(|| format!("conv kernel {kernel} stride {stride} on length {len} leaves no output"))
        }
        (LayerDescriptor::Gru { units }, Seq { len, .. }) => {
            if units == 0 {
                return Err("GRU with zero units".into());
            }
            Ok(Seq { len, channels: units })
        }
        (LayerDescriptor::Pool { length, .. }, Seq { len, channels }) => {
            if length == 0 || len / length == 0 {
                Err(format!(
                    "pool length {length} on sequence length {len} leaves no output"
                ))
            } else {
                Ok(Seq {
                    len: len / length,
                    channels,
                })
            }
        }
        (LayerDescriptor::GlobalAvgPool, Seq { channels, .. }) => Ok(Flat(channels)),
        (LayerDescriptor::Flatten, s) => Ok(Flat(s.numel())),
        (LayerDescriptor::Dense { units, .. }, Flat(_)) => {
            if units == 0 {
                Err("dense with zero units".into())
            } else {
                Ok(Flat(units))
            }
        }
        (l, Flat(_)) => Err(format!("{} needs a sequence input", l.name())),
        (LayerDescriptor::Dense { .. }, Seq { .. }) => Err("Dense needs a flat input".into()),
    }
}

/// (trainable, non-trainable) parameter counts of one layer.
pub fn layer_params(layer: &LayerDescriptor, input: FeatureShape) -> (usize, usize) {
    match *layer {
        LayerDescriptor::BatchNorm => {
            let c = input.features();
            (2 * c, 2 * c)
        }
        LayerDescriptor::Conv1d { filters, kernel, .. } => (filters * (input.features() * kernel + 1), 0),
        LayerDescriptor::Gru { units } => {
            let i = input.features();
            (3 * (units * (i + units) + 2 * units), 0)
        }
        LayerDescriptor::Dense { units, .. } => ((input.features() + 1) * units, 0),
        LayerDescriptor::Pool { .. }
        | LayerDescriptor::GlobalAvgPool
        | LayerDescriptor::Flatten
        | LayerDescriptor::Dropout { .. } => (0, 0),
    }
}

/// Output shape after every layer, in order.
pub fn resolve_shapes(spec: &ArchitectureSpec, input: FeatureShape) -> Result<Vec<FeatureShape>> {
    let mut shape = input;
    let mut shapes = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        shape = layer_output_shape(layer, shape).map_err(|reason| Error::UnresolvableShape { layer: i, reason })?;
        shapes.push(shape);
    }
    Ok(shapes)
}

/// Exact parameter count and 4-byte memory footprint.
pub fn param_count(spec: &ArchitectureSpec, input: FeatureShape) -> Result<MemoryEstimate> {
    let mut shape = input;
    let (mut trainable, mut fixed) = (0usize, 0usize);
    for (i, layer) in spec.layers.iter().enumerate() {
        let (t, n) = layer_params(layer, shape);
        trainable += t;
        fixed += n;
        shape = layer_output_shape(layer, shape).map_err(|reason| Error::UnresolvableShape { layer: i, reason })?;
    }
    Ok(MemoryEstimate::from_counts(trainable, fixed))
}

/// True when the parameter memory does not exceed `budget_kb`.
pub fn fits_budget(spec: &ArchitectureSpec, input: FeatureShape, budget_kb: f64) -> Result<bool> {
    Ok(param_count(spec, input)?.kilobytes <= budget_kb)
}
