use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::space::{params_to_kb, ArchitectureSpec, FeatureShape, LayerDescriptor};
use crate::tensor::{Real, Tensor};

use super::layer::{Cache, Layer};

/// An architecture bound to concrete weights. The last layer is always a
/// single-unit sigmoid dense layer, so outputs are fall probabilities.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ArchitectureSpec,
    input: FeatureShape,
    pub(crate) layers: Vec<Layer<T>>,
}

/// Per-layer, per-parameter gradient tensors aligned with [`Model::layers`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub layers: Vec<Vec<Tensor<T>>>,
}

/// Intermediate values of a training-mode forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    l.params
                        .iter()
                        .map(|p| Tensor::zeros(p.value.shape().to_vec()))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            for g in layer {
                g.ensure_finite(&format!("gradient of layer {i}"))?;
            }
        }
        Ok(())
    }
}

impl<T: Real> Model<T> {
    /// Builds the model and initialises weights from `seed`.
    pub fn new(spec: ArchitectureSpec, input: FeatureShape, seed: u64) -> Result<Self> {
        match spec.layers.last() {
            Some(LayerDescriptor::Dense { units: 1, .. }) => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "model must end in a single-unit dense layer".into(),
                ))
            }
        }
        let mut rng = seed::rng(seed);
        let mut shape = input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, d) in spec.layers.iter().enumerate() {
            let layer = Layer::new(*d, shape, &mut rng).map_err(|e| e.context(format!("layer {i}")))?;
            shape = layer.output_shape;
            layers.push(layer);
        }
        Ok(Self { spec, input, layers })
    }

    /// Reassembles a model from already-populated layers.
    pub fn from_layers(spec: ArchitectureSpec, input: FeatureShape, layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.len() != spec.layers.len() {
            return Err(Error::Shape("layer count differs from spec".into()));
        }
        Ok(Self { spec, input, layers })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> FeatureShape {
        self.input
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Number of scalars actually allocated across all layers.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn memory_kb(&self) -> f64 {
        params_to_kb(self.param_count())
    }

    /// Parameters whose value is not exactly zero.
    pub fn nonzero_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.params)
            .map(|p| p.value.data().iter().filter(|v| **v != T::zero()).count())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            input: self.input,
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<()> {
        let dims = self.input.dims();
        if x.shape().len() != dims.len() + 1 || x.shape()[1..] != dims[..] {
            return Err(Error::Shape(format!(
                "model expects [batch, {:?}], got {:?}",
                dims,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass returning `[batch, 1]` probabilities.
    /// Takes `&self`, so a trained model can serve concurrent callers.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(x)?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward_inference(&h)?;
            h.ensure_finite(&format!("activation of layer {i}"))?;
        }
        Ok(h)
    }

    /// Forward pass in either mode. Training mode uses batch statistics,
    /// updates batch-norm moving averages and applies dropout drawn from `rng`.
    pub fn forward(&mut self, x: &Tensor<T>, training: bool, rng: &mut Rng) -> Result<Tensor<T>> {
        if training {
            Ok(self.forward_tape(x, rng)?.0)
        } else {
            self.predict(x)
        }
    }

    /// Training-mode forward that also records what backward needs.
    pub fn forward_tape(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_batch(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (out, cache) = layer.forward_train(&h, rng)?;
            out.ensure_finite(&format!("activation of layer {i}"))?;
            caches.push(cache);
            h = out;
        }
        Ok((h, Tape { caches }))
    }

    /// Back-propagates the gradient with respect to the output logits.
    pub fn backward(&self, tape: &Tape<T>, logit_grad: &[T]) -> Result<Gradients<T>> {
        let mut grads = Gradients::zeros_like(self);
        let batch = logit_grad.len();
        let mut g = Tensor::new(vec![batch, 1], logit_grad.to_vec())?;
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].backward(&tape.caches[i], &g, &mut grads.layers[i], i == last)?;
        }
        grads.ensure_finite()?;
        Ok(grads)
    }

    /// Adds the lasso subgradient λ·sign(w) for dense kernels (sign(0) = 0)
    /// and zeroes the gradient of every masked weight.
    pub fn regularize(&self, grads: &mut Gradients<T>, lasso_lambda: f64) {
        let lambda = T::lit(lasso_lambda);
        for (layer, lg) in self.layers.iter().zip(&mut grads.layers) {
            for (p, g) in layer.params.iter().zip(lg.iter_mut()) {
                if lasso_lambda > 0.0 && matches!(layer.descriptor, LayerDescriptor::Dense { .. }) && p.name == "kernel"
                {
                    for (gv, &w) in g.data_mut().iter_mut().zip(p.value.data()) {
                        if w > T::zero() {
                            *gv += lambda;
                        } else if w < T::zero() {
                            *gv -= lambda;
                        }
                    }
                }
                if let Some(mask) = &p.mask {
                    for (gv, &keep) in g.data_mut().iter_mut().zip(mask) {
                        if !keep {
                            *gv = T::zero();
                        }
                    }
                }
            }
        }
    }

    /// λ Σ|w| over dense kernels.
    pub fn lasso_penalty(&self, lasso_lambda: f64) -> f64 {
        let sum: f64 = self
            .layers
            .iter()
            .filter(|l| matches!(l.descriptor, LayerDescriptor::Dense { .. }))
            .flat_map(|l| l.params.iter().filter(|p| p.name == "kernel"))
            .flat_map(|p| p.value.data().iter().map(|v| v.to_f64_lossy().abs()))
            .sum();
        lasso_lambda * sum
    }

    pub fn apply_masks(&mut self) {
        for layer in &mut self.layers {
            for p in &mut layer.params {
                p.apply_mask();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Activation, Pipeline};

    fn tiny() -> ArchitectureSpec {
        ArchitectureSpec::new(
            Pipeline::Cnn,
            vec![
                LayerDescriptor::BatchNorm,
                LayerDescriptor::GlobalAvgPool,
                LayerDescriptor::Dense {
                    units: 4,
                    activation: Activation::Tanh,
                },
                LayerDescriptor::OUTPUT,
            ],
        )
    }

    #[test]
    fn requires_single_unit_head() {
        let mut spec = tiny();
        spec.layers.pop();
        assert!(Model::<f32>::new(spec, FeatureShape::Seq { len: 5, channels: 2 }, 0).is_err());
    }

    #[test]
    fn outputs_are_probabilities() {
        let model = Model::<f32>::new(tiny(), FeatureShape::Seq { len: 5, channels: 2 }, 1).unwrap();
        let x = Tensor::new(vec![3, 5, 2], (0..30).map(|i| (i as f32 * 0.37).sin() * 4.0).collect()).unwrap();
        let y = model.predict(&x).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        assert!(y.data().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn zero_weight_has_zero_lasso_subgradient() {
        let mut model = Model::<f64>::new(tiny(), FeatureShape::Seq { len: 5, channels: 2 }, 1).unwrap();
        let dense = 2;
        model.layers[dense].params[0].value.fill(0.0);
        let mut grads = Gradients::zeros_like(&model);
        model.regularize(&mut grads, 1e-3);
        assert!(grads.layers[dense][0].data().iter().all(|&g| g == 0.0));
        model.layers[dense].params[0].value.fill(-2.0);
        model.regularize(&mut grads, 1e-3);
        assert!(grads.layers[dense][0].data().iter().all(|&g| g == -1e-3));
    }
}
