//! Structural validation of layer sequences.
//!
//! ```text
//! spec       = BatchNorm feature{1,10} prefinal final{0,3} Output
//! feature    = (Conv1D | GRU) [BatchNorm] [Pool]      ; Pool only in CNN pipelines
//! prefinal   = [GlobalAvgPool] [Dropout] Flatten
//! final      = [BatchNorm] [Dense] [Dropout]           ; non-empty when present
//! Output     = Dense(units=1, activation=sigmoid)
//! ```

use super::descriptor::{Activation, ArchitectureSpec, LayerDescriptor, Pipeline};
use crate::error::{Error, Result};

pub const MAX_FEATURE_BLOCKS: usize = 10;
pub const MAX_FINAL_BLOCKS: usize = 3;
pub const FILTERS: (usize, usize) = (1, 500);
pub const KERNEL: (usize, usize) = (1, 8);
pub const STRIDES: [usize; 2] = [1, 2];
pub const POOL_LENGTHS: [usize; 4] = [2, 4, 8, 16];
pub const GRU_UNITS: (usize, usize) = (30, 256);
pub const DENSE_UNITS: (usize, usize) = (3, 1024);

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Grammar(msg.into()))
}

fn check_range(what: &str, v: usize, (lo, hi): (usize, usize)) -> Result<()> {
    if v < lo || v > hi {
        return fail(format!("{what} {v} outside {lo}..={hi}"));
    }
    Ok(())
}

fn check_activation(a: Activation) -> Result<()> {
    if Activation::SEARCHABLE.contains(&a) {
        Ok(())
    } else {
        fail(format!("activation {} not in the search space", a.as_str()))
    }
}

fn check_dropout(pipeline: Pipeline, rate: f64) -> Result<()> {
    let (lo, hi) = pipeline.dropout_range();
    if !(rate >= lo - 1e-9 && rate <= hi + 1e-9) {
        return fail(format!("dropout rate {rate} outside {lo}..={hi} for {pipeline}"));
    }
    Ok(())
}

/// Number of feature blocks, assuming `spec` already validates.
pub fn feature_block_count(spec: &ArchitectureSpec) -> usize {
    spec.layers
        .iter()
        .filter(|l| matches!(l, LayerDescriptor::Conv1d { .. } | LayerDescriptor::Gru { .. }))
        .count()
}

/// Checks layer order, block repetition counts and hyperparameter ranges.
pub fn validate(spec: &ArchitectureSpec) -> Result<()> {
    let layers = &spec.layers;
    let n = layers.len();
    let at = |i: usize| layers.get(i);

    if at(0) != Some(&LayerDescriptor::BatchNorm) {
        return fail("first layer must be BatchNorm");
    }
    let mut i = 1;

    let mut blocks = 0;
    loop {
        match at(i) {
            Some(LayerDescriptor::Conv1d {
                filters,
                kernel,
                stride,
                activation,
                ..
            }) => {
                if spec.pipeline != Pipeline::Cnn {
                    return fail(format!("Conv1D at layer {i} in a GRU pipeline"));
                }
                check_range("filters", *filters, FILTERS)?;
                check_range("kernel", *kernel, KERNEL)?;
                if !STRIDES.contains(stride) {
                    return fail(format!("stride {stride} not in {STRIDES:?}"));
                }
                check_activation(*activation)?;
            }
            Some(LayerDescriptor::Gru { units }) => {
                if spec.pipeline != Pipeline::Gru {
                    return fail(format!("GRU at layer {i} in a CNN pipeline"));
                }
                check_range("GRU units", *units, GRU_UNITS)?;
            }
            _ => break,
        }
        i += 1;
        blocks += 1;
        if at(i) == Some(&LayerDescriptor::BatchNorm) {
            i += 1;
        }
        if let Some(LayerDescriptor::Pool { length, .. }) = at(i) {
            if spec.pipeline != Pipeline::Cnn {
                return fail(format!("Pool at layer {i} in a GRU pipeline"));
            }
            if !POOL_LENGTHS.contains(length) {
                return fail(format!("pool length {length} not in {POOL_LENGTHS:?}"));
            }
            i += 1;
        }
    }
    if blocks == 0 {
        return fail("at least one feature block is required");
    }
    if blocks > MAX_FEATURE_BLOCKS {
        return fail(format!("{blocks} feature blocks exceed {MAX_FEATURE_BLOCKS}"));
    }

    if at(i) == Some(&LayerDescriptor::GlobalAvgPool) {
        i += 1;
    }
    if let Some(LayerDescriptor::Dropout { rate }) = at(i) {
        check_dropout(spec.pipeline, *rate)?;
        i += 1;
    }
    if at(i) != Some(&LayerDescriptor::Flatten) {
        return fail(format!("expected Flatten at layer {i}"));
    }
    i += 1;

    if n == 0 || layers[n - 1] != LayerDescriptor::OUTPUT || i > n - 1 {
        return fail("last layer must be Dense(units=1, activation=sigmoid)");
    }
    let end = n - 1;
    let mut final_blocks = 0;
    while i < end {
        let start = i;
        if at(i) == Some(&LayerDescriptor::BatchNorm) {
            i += 1;
        }
        if i < end {
            if let Some(LayerDescriptor::Dense { units, activation }) = at(i) {
                check_range("dense units", *units, DENSE_UNITS)?;
                check_activation(*activation)?;
                i += 1;
            }
        }
        if i < end {
            if let Some(LayerDescriptor::Dropout { rate }) = at(i) {
                check_dropout(spec.pipeline, *rate)?;
                i += 1;
            }
        }
        if i == start {
            return fail(format!("unexpected {} at layer {i}", layers[i].name()));
        }
        final_blocks += 1;
    }
    if final_blocks > MAX_FINAL_BLOCKS {
        return fail(format!("{final_blocks} final blocks exceed {MAX_FINAL_BLOCKS}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::descriptor::{Padding, PoolKind};

    fn conv() -> LayerDescriptor {
        LayerDescriptor::Conv1d {
            filters: 8,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Relu,
        }
    }

    fn minimal(pipeline: Pipeline, feature: LayerDescriptor) -> ArchitectureSpec {
        ArchitectureSpec::new(
            pipeline,
            vec![
                LayerDescriptor::BatchNorm,
                feature,
                LayerDescriptor::Flatten,
                LayerDescriptor::OUTPUT,
            ],
        )
    }

    #[test]
    fn minimal_specs_validate() {
        validate(&minimal(Pipeline::Cnn, conv())).unwrap();
        validate(&minimal(Pipeline::Gru, LayerDescriptor::Gru { units: 30 })).unwrap();
    }

    #[test]
    fn pool_rejected_in_gru_pipeline() {
        let mut spec = minimal(Pipeline::Gru, LayerDescriptor::Gru { units: 30 });
        spec.layers.insert(
            2,
            LayerDescriptor::Pool {
                kind: PoolKind::Max,
                length: 2,
            },
        );
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn too_many_feature_blocks() {
        let mut spec = minimal(Pipeline::Cnn, conv());
        for _ in 0..10 {
            spec.layers.insert(1, conv());
        }
        assert!(validate(&spec).is_err());
        spec.layers.remove(1);
        validate(&spec).unwrap();
    }

    #[test]
    fn missing_flatten() {
        let mut spec = minimal(Pipeline::Cnn, conv());
        spec.layers.retain(|l| *l != LayerDescriptor::Flatten);
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn too_many_final_blocks() {
        let mut spec = minimal(Pipeline::Cnn, conv());
        let dense = LayerDescriptor::Dense {
            units: 8,
            activation: Activation::Tanh,
        };
        for _ in 0..3 {
            spec.layers.insert(3, dense);
        }
        validate(&spec).unwrap();
        spec.layers.insert(3, dense);
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn out_of_range_values() {
        let mut spec = minimal(Pipeline::Cnn, conv());
        spec.layers[1] = LayerDescriptor::Conv1d {
            filters: 501,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Relu,
        };
        assert!(validate(&spec).is_err());
        let mut spec = minimal(Pipeline::Cnn, conv());
        spec.layers.insert(2, LayerDescriptor::Dropout { rate: 0.25 });
        assert!(validate(&spec).is_err(), "GRU dropout range used in CNN pipeline");
    }

    #[test]
    fn wrong_output_head() {
        let mut spec = minimal(Pipeline::Cnn, conv());
        *spec.layers.last_mut().unwrap() = LayerDescriptor::Dense {
            units: 2,
            activation: Activation::Sigmoid,
        };
        assert!(validate(&spec).is_err());
    }
}
