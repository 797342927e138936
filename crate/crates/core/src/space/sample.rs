//! Random sampling of architectures and optimizer hyperparameters.

use rand::Rng as _;

use super::descriptor::{Activation, ArchitectureSpec, Hyperparameters, LayerDescriptor, Padding, Pipeline, PoolKind};
use super::grammar::{
    DENSE_UNITS, FILTERS, GRU_UNITS, KERNEL, MAX_FEATURE_BLOCKS, MAX_FINAL_BLOCKS, POOL_LENGTHS, STRIDES,
};
use super::shape::{resolve_shapes, FeatureShape};
use crate::seed::Rng;

pub const LEARNING_RATE: (f64, f64) = (1e-6, 1e-2);
pub const LASSO_LAMBDA: (f64, f64) = (1e-5, 1e-3);

fn log_uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
}

fn pick<T: Copy>(rng: &mut Rng, items: &[T]) -> T {
    items[rng.gen_range(0..items.len())]
}

fn activation(rng: &mut Rng) -> Activation {
    pick(rng, &Activation::SEARCHABLE)
}

fn dropout(rng: &mut Rng, pipeline: Pipeline) -> LayerDescriptor {
    let (lo, hi) = pipeline.dropout_range();
    LayerDescriptor::Dropout {
        rate: rng.gen_range(lo..=hi),
    }
}

fn draw_layers(rng: &mut Rng, pipeline: Pipeline) -> Vec<LayerDescriptor> {
    let mut layers = vec![LayerDescriptor::BatchNorm];
    let blocks = rng.gen_range(1..=MAX_FEATURE_BLOCKS);
    for _ in 0..blocks {
        layers.push(match pipeline {
            Pipeline::Cnn => LayerDescriptor::Conv1d {
                filters: rng.gen_range(FILTERS.0..=FILTERS.1),
                kernel: rng.gen_range(KERNEL.0..=KERNEL.1),
                stride: pick(rng, &STRIDES),
                padding: pick(rng, &[Padding::Same, Padding::Valid]),
                activation: activation(rng),
            },
            Pipeline::Gru => LayerDescriptor::Gru {
                units: rng.gen_range(GRU_UNITS.0..=GRU_UNITS.1),
            },
        });
        if rng.gen_bool(0.5) {
            layers.push(LayerDescriptor::BatchNorm);
        }
        if pipeline == Pipeline::Cnn && rng.gen_bool(0.5) {
            layers.push(LayerDescriptor::Pool {
                kind: pick(rng, &[PoolKind::Max, PoolKind::Avg]),
                length: pick(rng, &POOL_LENGTHS),
            });
        }
    }
    if rng.gen_bool(0.5) {
        layers.push(LayerDescriptor::GlobalAvgPool);
    }
    if rng.gen_bool(0.5) {
        layers.push(dropout(rng, pipeline));
    }
    layers.push(LayerDescriptor::Flatten);
    let finals = rng.gen_range(1..=MAX_FINAL_BLOCKS);
    for _ in 0..finals {
        if rng.gen_bool(0.5) {
            layers.push(LayerDescriptor::BatchNorm);
        }
        if rng.gen_bool(0.5) {
            layers.push(LayerDescriptor::Dense {
                units: rng.gen_range(DENSE_UNITS.0..=DENSE_UNITS.1),
                activation: activation(rng),
            });
        }
        if rng.gen_bool(0.5) {
            layers.push(dropout(rng, pipeline));
        }
    }
    layers.push(LayerDescriptor::OUTPUT);
    layers
}

/// Draws a grammar-conforming architecture whose shape chain resolves for
/// `input`, together with optimizer hyperparameters. Draws whose shape
/// chain collapses are discarded and redrawn. No memory check is made.
pub fn sample_architecture(
    pipeline: Pipeline,
    input: FeatureShape,
    rng: &mut Rng,
) -> (ArchitectureSpec, Hyperparameters) {
    let spec = loop {
        let spec = ArchitectureSpec::new(pipeline, draw_layers(rng, pipeline));
        if resolve_shapes(&spec, input).is_ok() {
            break spec;
        }
    };
    let hyper = Hyperparameters {
        learning_rate: log_uniform(rng, LEARNING_RATE),
        lasso_lambda: log_uniform(rng, LASSO_LAMBDA),
    };
    (spec, hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::space::grammar::validate;

    const INPUT: FeatureShape = FeatureShape::Seq { len: 120, channels: 6 };

    #[test]
    fn gru_specs_never_pool() {
        let mut rng = seed::rng(3);
        for _ in 0..500 {
            let (spec, _) = sample_architecture(Pipeline::Gru, INPUT, &mut rng);
            assert!(!spec.layers.iter().any(|l| matches!(l, LayerDescriptor::Pool { .. })));
            assert!(!spec.layers.iter().any(|l| matches!(l, LayerDescriptor::Conv1d { .. })));
        }
    }

    #[test]
    fn hyperparameters_in_range() {
        let mut rng = seed::rng(4);
        for _ in 0..500 {
            let (spec, h) = sample_architecture(Pipeline::Cnn, INPUT, &mut rng);
            validate(&spec).unwrap();
            assert!((LEARNING_RATE.0..=LEARNING_RATE.1).contains(&h.learning_rate));
            assert!((LASSO_LAMBDA.0..=LASSO_LAMBDA.1).contains(&h.lasso_lambda));
        }
    }

    #[test]
    fn seeded_sequences_repeat() {
        let draw = |s| {
            let mut rng = seed::rng(s);
            (0..20)
                .map(|_| sample_architecture(Pipeline::Cnn, INPUT, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}
