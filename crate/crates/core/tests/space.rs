use micronas::nn::Model;
use micronas::seed;
use micronas::space::{
    cost_estimate, fits_budget, param_count, reference_cnn, reference_gru, resolve_shapes, sample_architecture,
    shape::layer_params, validate, Activation, ArchitectureSpec, FeatureShape, LayerDescriptor as L, Padding, Pipeline,
    WINDOW_SHAPE,
};
use micronas::tensor::Tensor;
use proptest::prelude::*;

#[test]
fn ten_thousand_samples_validate() {
    let mut rng = seed::rng(2024);
    for i in 0..10_000 {
        let pipeline = if i % 2 == 0 { Pipeline::Cnn } else { Pipeline::Gru };
        let (spec, _) = sample_architecture(pipeline, WINDOW_SHAPE, &mut rng);
        validate(&spec).unwrap();
        resolve_shapes(&spec, WINDOW_SHAPE).unwrap();
    }
}

#[test]
fn golden_single_layer_counts() {
    let conv = L::Conv1d {
        filters: 141,
        kernel: 8,
        stride: 2,
        padding: Padding::Same,
        activation: Activation::Relu,
    };
    assert_eq!(layer_params(&conv, WINDOW_SHAPE).0, 6909);
    assert_eq!(layer_params(&L::Gru { units: 30 }, WINDOW_SHAPE).0, 3420);
    let dense = L::Dense {
        units: 1003,
        activation: Activation::Relu,
    };
    assert_eq!(layer_params(&dense, FeatureShape::Flat(30)).0, 31_093);
}

#[test]
fn golden_reference_totals() {
    let a = param_count(&reference_cnn(), WINDOW_SHAPE).unwrap();
    assert_eq!((a.total_params, a.non_trainable_params), (41_873, 1458));
    assert_eq!(a.trainable_params, 40_415);
    assert!((a.kilobytes - 163.57).abs() < 0.01);
    let b = param_count(&reference_gru(), WINDOW_SHAPE).unwrap();
    assert_eq!((b.total_params, b.non_trainable_params), (36_021, 252));
    assert!((b.kilobytes - 140.71).abs() < 0.01);
    validate(&reference_cnn()).unwrap();
    validate(&reference_gru()).unwrap();
}

#[test]
fn budget_examples() {
    assert!(fits_budget(&reference_cnn(), WINDOW_SHAPE, 320.0).unwrap());
    assert!(!fits_budget(&reference_cnn(), WINDOW_SHAPE, 100.0).unwrap());
    let minimal = ArchitectureSpec::new(
        Pipeline::Cnn,
        vec![
            L::BatchNorm,
            L::Conv1d {
                filters: 1,
                kernel: 1,
                stride: 1,
                padding: Padding::Same,
                activation: Activation::Relu,
            },
            L::Flatten,
            L::OUTPUT,
        ],
    );
    let kb = param_count(&minimal, WINDOW_SHAPE).unwrap().kilobytes;
    assert!(fits_budget(&minimal, WINDOW_SHAPE, kb).unwrap());
    assert!(fits_budget(&minimal, WINDOW_SHAPE, 320.0).unwrap());
}

#[test]
fn cost_examples() {
    let conv = ArchitectureSpec::new(
        Pipeline::Cnn,
        vec![L::Conv1d {
            filters: 141,
            kernel: 8,
            stride: 2,
            padding: Padding::Same,
            activation: Activation::Relu,
        }],
    );
    assert_eq!(cost_estimate(&conv, WINDOW_SHAPE).unwrap().conv_cost, 406_080);
    let gru = ArchitectureSpec::new(Pipeline::Gru, vec![L::Gru { units: 30 }]);
    assert_eq!(cost_estimate(&gru, WINDOW_SHAPE).unwrap().gru_cost, 4_500);
    let none = ArchitectureSpec::new(Pipeline::Cnn, vec![L::BatchNorm, L::Flatten, L::OUTPUT]);
    assert_eq!(cost_estimate(&none, WINDOW_SHAPE).unwrap().total(), 0);
}

/// Builds the model layer by layer, pushing a one-window batch through each
/// layer and comparing against the symbolic shape chain.
#[test]
fn engine_shapes_and_allocations_match_symbolic_chain() {
    let mut rng = seed::rng(77);
    let x = Tensor::<f32>::filled(vec![1, 120, 6], 0.25);
    let mut checked = 0;
    while checked < 1000 {
        let pipeline = if checked % 2 == 0 { Pipeline::Cnn } else { Pipeline::Gru };
        let (spec, _) = sample_architecture(pipeline, WINDOW_SHAPE, &mut rng);
        // Keep the forward pass cheap; the symbolic checks do not depend on size.
        if !fits_budget(&spec, WINDOW_SHAPE, 160.0).unwrap() {
            continue;
        }
        let shapes = resolve_shapes(&spec, WINDOW_SHAPE).unwrap();
        let estimate = param_count(&spec, WINDOW_SHAPE).unwrap();
        let model = Model::<f32>::new(spec, WINDOW_SHAPE, checked as u64).unwrap();
        assert_eq!(model.param_count(), estimate.total_params);
        let mut h = x.clone();
        for (layer, expected) in model.layers().iter().zip(&shapes) {
            h = layer.forward_inference(&h).unwrap();
            let mut dims = vec![1];
            dims.extend(expected.dims());
            assert_eq!(h.shape(), &dims[..]);
        }
        checked += 1;
    }
}

/// A parameterised layer that leaves `shape` unchanged, so downstream
/// layer sizes are unaffected by inserting it.
fn shape_preserving(kind: usize, shape: FeatureShape) -> L {
    match (kind % 3, shape) {
        (1, FeatureShape::Seq { channels, .. }) => L::Conv1d {
            filters: channels,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Tanh,
        },
        (2, FeatureShape::Seq { channels, .. }) => L::Gru { units: channels },
        (2, FeatureShape::Flat(n)) => L::Dense {
            units: n,
            activation: Activation::Relu,
        },
        _ => L::BatchNorm,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn adding_a_parameterised_layer_never_shrinks_memory(seed_value in any::<u64>(), kind in 0usize..3, at in any::<prop::sample::Index>(), gru in any::<bool>()) {
        let mut rng = seed::rng(seed_value);
        let pipeline = if gru { Pipeline::Gru } else { Pipeline::Cnn };
        let (spec, _) = sample_architecture(pipeline, WINDOW_SHAPE, &mut rng);
        let before = param_count(&spec, WINDOW_SHAPE).unwrap();
        let mut inputs = vec![WINDOW_SHAPE];
        inputs.extend(resolve_shapes(&spec, WINDOW_SHAPE).unwrap());
        let pos = at.index(spec.layers.len());
        let layer = shape_preserving(kind, inputs[pos]);
        let mut bigger = spec.clone();
        bigger.layers.insert(pos, layer);
        let after = param_count(&bigger, WINDOW_SHAPE).unwrap();
        prop_assert!(after.total_params > before.total_params);
        prop_assert!(after.kilobytes > before.kilobytes);
    }

    #[test]
    fn budget_feasibility_is_monotone(seed_value in any::<u64>(), b in 1.0f64..3000.0, extra in 0.0f64..3000.0) {
        let mut rng = seed::rng(seed_value);
        let (spec, _) = sample_architecture(Pipeline::Cnn, WINDOW_SHAPE, &mut rng);
        if fits_budget(&spec, WINDOW_SHAPE, b).unwrap() {
            prop_assert!(fits_budget(&spec, WINDOW_SHAPE, b + extra).unwrap());
        }
    }
}
