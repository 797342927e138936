use crate::error::Result;
use crate::tensor::{Real, Tensor};

use super::model::{Gradients, Model};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam over every trainable parameter of a model.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    learning_rate: f64,
    step: i32,
    m: Vec<Vec<Tensor<T>>>,
    v: Vec<Vec<Tensor<T>>>,
}

impl<T: Real> Adam<T> {
    /// Moments start at zero with the shapes of `model`'s parameters.
    pub fn new(model: &Model<T>, learning_rate: f64) -> Self {
        let zeros = Gradients::zeros_like(model).layers;
        Self {
            learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Applies one update, then re-zeroes every masked weight.
    pub fn step(&mut self, model: &mut Model<T>, grads: &Gradients<T>) -> Result<()> {
        grads.ensure_finite()?;
        self.step += 1;
        let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
        let correction1 = T::one() - b1.powi(self.step);
        let correction2 = T::one() - b2.powi(self.step);
        let lr = T::lit(self.learning_rate);
        let eps = T::lit(EPSILON);
        for (li, layer) in model.layers.iter_mut().enumerate() {
            for (pi, param) in layer.params.iter_mut().enumerate() {
                if !param.trainable {
                    continue;
                }
                let g = grads.layers[li][pi].data();
                let m = self.m[li][pi].data_mut();
                let v = self.v[li][pi].data_mut();
                for (k, w) in param.value.data_mut().iter_mut().enumerate() {
                    m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                    v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                    let m_hat = m[k] / correction1;
                    let v_hat = v[k] / correction2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                }
                param.apply_mask();
            }
        }
        Ok(())
    }
}
