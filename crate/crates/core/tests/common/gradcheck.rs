//! Central-difference gradient checking in 64-bit.

use micronas::data::ClassWeights;
use micronas::nn::{logit_gradient, weighted_bce, Model};
use micronas::seed;
use micronas::space::{Activation, ArchitectureSpec, FeatureShape, LayerDescriptor as L, Padding, Pipeline, PoolKind};
use micronas::tensor::Tensor;
use rand::Rng;

const H: f64 = 1e-5;
pub const LAMBDA: f64 = 1e-3;
pub const WEIGHTS: ClassWeights = ClassWeights { adl: 0.7, fall: 2.5 };
pub const TOLERANCE: f64 = 1e-4;

pub fn input(batch: usize, shape: FeatureShape, seed: u64) -> Tensor<f64> {
    let mut rng = seed::rng(seed);
    let n = batch * shape.numel();
    let mut dims = vec![batch];
    dims.extend(shape.dims());
    Tensor::new(dims, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

fn targets(batch: usize) -> Vec<f64> {
    (0..batch).map(|i| (i % 2) as f64).collect()
}

fn loss(model: &mut Model<f64>, x: &Tensor<f64>, t: &[f64]) -> f64 {
    let mut rng = seed::rng(99);
    let (y, _) = model.forward_tape(x, &mut rng).unwrap();
    weighted_bce(y.data(), t, WEIGHTS).unwrap() + model.lasso_penalty(LAMBDA)
}

/// Compares every trainable parameter's analytic gradient with a central
/// difference. Returns the number of entries checked or the first mismatch.
///
/// Zero-initialised biases are moved off zero first: an all-zero input row
/// (easy to get after dropout) would otherwise sit exactly on a ReLU kink,
/// where the central difference averages the two one-sided slopes.
pub fn check_gradients(spec: ArchitectureSpec, shape: FeatureShape, batch: usize) -> Result<usize, String> {
    let mut model = Model::<f64>::new(spec, shape, 5).map_err(|e| e.to_string())?;
    let mut jitter = seed::rng(7);
    for p in model.layers_mut().iter_mut().flat_map(|l| l.params.iter_mut()) {
        if p.name == "bias" || p.name == "beta" {
            p.value
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = jitter.gen_range(-0.3..0.3));
        }
    }
    let x = input(batch, shape, 11);
    let t = targets(batch);

    let mut rng = seed::rng(99);
    let (y, tape) = model.forward_tape(&x, &mut rng).unwrap();
    let g = logit_gradient(y.data(), &t, WEIGHTS).unwrap();
    let mut grads = model.backward(&tape, &g).unwrap();
    model.regularize(&mut grads, LAMBDA);

    let mut checked = 0;
    for li in 0..model.layers().len() {
        for pi in 0..model.layers()[li].params.len() {
            if !model.layers()[li].params[pi].trainable {
                continue;
            }
            for k in 0..model.layers()[li].params[pi].value.len() {
                let orig = model.layers()[li].params[pi].value.data()[k];
                model.layers_mut()[li].params[pi].value.data_mut()[k] = orig + H;
                let plus = loss(&mut model, &x, &t);
                model.layers_mut()[li].params[pi].value.data_mut()[k] = orig - H;
                let minus = loss(&mut model, &x, &t);
                model.layers_mut()[li].params[pi].value.data_mut()[k] = orig;
                let numeric = (plus - minus) / (2.0 * H);
                let analytic = grads.layers[li][pi].data()[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
                if rel >= TOLERANCE {
                    return Err(format!(
                        "layer {li} ({}) param {} [{k}]: analytic {analytic} numeric {numeric}",
                        model.layers()[li].descriptor.name(),
                        model.layers()[li].params[pi].name
                    ));
                }
                checked += 1;
            }
        }
    }
    if checked == 0 {
        return Err("no trainable parameters".into());
    }
    Ok(checked)
}

pub fn seq(len: usize, channels: usize) -> FeatureShape {
    FeatureShape::Seq { len, channels }
}

pub fn conv(filters: usize, kernel: usize, stride: usize, padding: Padding, activation: Activation) -> L {
    L::Conv1d {
        filters,
        kernel,
        stride,
        padding,
        activation,
    }
}

pub fn dense(units: usize, activation: Activation) -> L {
    L::Dense { units, activation }
}

fn activation(i: usize) -> Activation {
    [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Linear,
    ][i % 4]
}

/// Random small stacks covering every layer type.
pub fn random_spec(recurrent: bool, picks: &[usize]) -> ArchitectureSpec {
    let p = |i: usize| picks[i % picks.len()];
    let mut layers = Vec::new();
    if p(0) % 2 == 0 {
        layers.push(L::BatchNorm);
    }
    if recurrent {
        layers.push(L::Gru { units: 1 + p(1) % 4 });
    } else {
        let padding = if p(2) % 2 == 0 { Padding::Same } else { Padding::Valid };
        layers.push(conv(
            1 + p(3) % 4,
            1 + p(4) % 3,
            1 + p(5) % 2,
            padding,
            activation(p(6)),
        ));
    }
    if p(7) % 2 == 0 {
        layers.push(L::BatchNorm);
    }
    if !recurrent && p(8) % 2 == 0 {
        let kind = if p(9) % 2 == 0 { PoolKind::Max } else { PoolKind::Avg };
        layers.push(L::Pool { kind, length: 2 });
    }
    if p(10) % 2 == 0 {
        layers.push(L::GlobalAvgPool);
    }
    if p(11) % 2 == 0 {
        layers.push(L::Dropout { rate: 0.3 });
    }
    layers.push(L::Flatten);
    if p(12) % 2 == 0 {
        layers.push(L::BatchNorm);
    }
    layers.push(dense(1 + p(13) % 5, activation(p(14))));
    if p(15) % 2 == 0 {
        layers.push(L::Dropout { rate: 0.2 });
    }
    layers.push(L::OUTPUT);
    let pipeline = if recurrent { Pipeline::Gru } else { Pipeline::Cnn };
    ArchitectureSpec::new(pipeline, layers)
}
