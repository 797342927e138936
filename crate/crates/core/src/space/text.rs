//! Human-readable architecture descriptor: a header followed by one layer per line.
//!
//! ```text
//! pipeline cnn
//! input 120 6
//! BatchNorm
//! Conv1D filters=141 kernel=8 stride=2 padding=same activation=relu
//! Pool kind=max length=2
//! GlobalAvgPool
//! Dropout rate=0.45
//! Flatten
//! Dense units=1 activation=sigmoid
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::descriptor::{Activation, ArchitectureSpec, LayerDescriptor, Padding, Pipeline, PoolKind};
use super::shape::{layer_output_shape, layer_params, param_count, FeatureShape};
use crate::error::{Error, Result};

pub fn format_layer(layer: &LayerDescriptor) -> String {
    match *layer {
        LayerDescriptor::BatchNorm => "BatchNorm".into(),
        LayerDescriptor::Conv1d {
            filters,
            kernel,
            stride,
            padding,
            activation,
        } => format!(
            "Conv1D filters={filters} kernel={kernel} stride={stride} padding={} activation={}",
            match padding {
                Padding::Same => "same",
                Padding::Valid => "valid",
            },
            activation.as_str()
        ),
        LayerDescriptor::Gru { units } => format!("GRU units={units}"),
        LayerDescriptor::Pool { kind, length } => format!(
            "Pool kind={} length={length}",
            match kind {
                PoolKind::Max => "max",
                PoolKind::Avg => "avg",
            }
        ),
        LayerDescriptor::GlobalAvgPool => "GlobalAvgPool".into(),
        LayerDescriptor::Flatten => "Flatten".into(),
        LayerDescriptor::Dropout { rate } => format!("Dropout rate={rate}"),
        LayerDescriptor::Dense { units, activation } => {
            format!("Dense units={units} activation={}", activation.as_str())
        }
    }
}

pub fn format_spec(spec: &ArchitectureSpec, input: FeatureShape) -> String {
    let mut out = format!("pipeline {}\n", spec.pipeline);
    if let FeatureShape::Seq { len, channels } = input {
        let _ = writeln!(out, "input {len} {channels}");
    }
    for layer in &spec.layers {
        out.push_str(&format_layer(layer));
        out.push('\n');
    }
    out
}

/// Short stable fingerprint of an architecture, used in trial logs.
pub fn spec_digest(spec: &ArchitectureSpec) -> String {
    let text = format_spec(spec, FeatureShape::Flat(0));
    let hash = Sha256::digest(text.as_bytes());
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Schema {
        row: line,
        reason: reason.into(),
    }
}

fn parse_layer(line_no: usize, line: &str) -> Result<LayerDescriptor> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().unwrap_or_default();
    let mut fields = HashMap::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key=value, got `{part}`")))?;
        fields.insert(k, v);
    }
    let get = |key: &str| -> Result<&str> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(line_no, format!("{kind} is missing `{key}`")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| parse_err(line_no, format!("`{key}` must be a non-negative integer")))
    };
    let act = |key: &str| -> Result<Activation> {
        match get(key)? {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(parse_err(line_no, format!("unknown activation `{other}`"))),
        }
    };
    Ok(match kind {
        "BatchNorm" => LayerDescriptor::BatchNorm,
        "Conv1D" => LayerDescriptor::Conv1d {
            filters: num("filters")?,
            kernel: num("kernel")?,
            stride: num("stride")?,
            padding: match get("padding")? {
                "same" => Padding::Same,
                "valid" => Padding::Valid,
                other => return Err(parse_err(line_no, format!("unknown padding `{other}`"))),
            },
            activation: act("activation")?,
        },
        "GRU" => LayerDescriptor::Gru { units: num("units")? },
        "Pool" => LayerDescriptor::Pool {
            kind: match get("kind")? {
                "max" => PoolKind::Max,
                "avg" => PoolKind::Avg,
                other => return Err(parse_err(line_no, format!("unknown pool kind `{other}`"))),
            },
            length: num("length")?,
        },
        "GlobalAvgPool" => LayerDescriptor::GlobalAvgPool,
        "Flatten" => LayerDescriptor::Flatten,
        "Dropout" => LayerDescriptor::Dropout {
            rate: get("rate")?
                .parse()
                .map_err(|_| parse_err(line_no, "`rate` must be a number"))?,
        },
        "Dense" => LayerDescriptor::Dense {
            units: num("units")?,
            activation: act("activation")?,
        },
        other => return Err(parse_err(line_no, format!("unknown layer `{other}`"))),
    })
}

/// Parses the descriptor text. The input shape defaults to 120 x 6 when no
/// `input` line is present.
pub fn parse_spec(text: &str) -> Result<(ArchitectureSpec, FeatureShape)> {
    let mut pipeline = None;
    let mut input = FeatureShape::Seq { len: 120, channels: 6 };
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("pipeline ") {
            pipeline = Some(rest.trim().parse::<Pipeline>().map_err(|e| parse_err(line_no, e))?);
        } else if let Some(rest) = line.strip_prefix("input ") {
            let dims: Vec<usize> = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(line_no, "input dimensions must be integers"))?;
            match dims.as_slice() {
                [len, channels] => {
                    input = FeatureShape::Seq {
                        len: *len,
                        channels: *channels,
                    }
                }
                _ => return Err(parse_err(line_no, "input needs <length> <channels>")),
            }
        } else {
            layers.push(parse_layer(line_no, line)?);
        }
    }
    let pipeline = pipeline.ok_or_else(|| parse_err(1, "missing `pipeline` header"))?;
    Ok((ArchitectureSpec::new(pipeline, layers), input))
}

/// Keras-style summary table with per-layer output shapes and parameter counts.
pub fn summary(spec: &ArchitectureSpec, input: FeatureShape) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{:<28}{:<20}{:>10}", "Layer (type)", "Output Shape", "Param #");
    let _ = writeln!(out, "{}", "-".repeat(58));
    let _ = writeln!(out, "{:<28}{:<20}{:>10}", "Input", input.to_string(), "");
    let mut shape = input;
    for (i, layer) in spec.layers.iter().enumerate() {
        let (t, n) = layer_params(layer, shape);
        shape = layer_output_shape(layer, shape).map_err(|reason| Error::UnresolvableShape { layer: i, reason })?;
        let _ = writeln!(out, "{:<28}{:<20}{:>10}", layer.name(), shape.to_string(), t + n);
    }
    let est = param_count(spec, input)?;
    let _ = writeln!(out, "{}", "-".repeat(58));
    let _ = writeln!(
        out,
        "Total parameters:         {} ({:.2} KB)",
        est.total_params, est.kilobytes
    );
    let _ = writeln!(
        out,
        "Trainable parameters:     {} ({:.2} KB)",
        est.trainable_params,
        super::shape::params_to_kb(est.trainable_params)
    );
    let _ = writeln!(
        out,
        "Non-trainable parameters: {} ({:.2} KB)",
        est.non_trainable_params,
        super::shape::params_to_kb(est.non_trainable_params)
    );
    Ok(out)
}
