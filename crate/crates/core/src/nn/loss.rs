//! Class-weighted binary cross-entropy on sigmoid outputs.

use crate::data::ClassWeights;
use crate::error::{Error, Result};
use crate::tensor::Real;

/// Probabilities are clamped to [EPSILON, 1 - EPSILON] before the logarithm.
pub const EPSILON: f64 = 1e-7;

fn check<T: Real>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if let Some(t) = target.iter().find(|&&t| t != T::zero() && t != T::one()) {
        return Err(Error::InvalidArgument(format!("target {t} is not 0 or 1")));
    }
    Ok(())
}

/// Mean over the batch of -[w_fall t ln p + w_adl (1 - t) ln(1 - p)].
pub fn weighted_bce<T: Real>(pred: &[T], target: &[T], weights: ClassWeights) -> Result<T> {
    check(pred, target)?;
    let eps = T::lit(EPSILON);
    let (w_adl, w_fall) = (T::lit(weights.adl), T::lit(weights.fall));
    let sum: T = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.max(eps).min(T::one() - eps);
            -(w_fall * t * p.ln() + w_adl * (T::one() - t) * (T::one() - p).ln())
        })
        .sum();
    let loss = sum / T::from_usize(pred.len()).unwrap();
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

/// Gradient of [`weighted_bce`] with respect to the output logits:
/// w_class (p - t) / batch.
pub fn logit_gradient<T: Real>(pred: &[T], target: &[T], weights: ClassWeights) -> Result<Vec<T>> {
    check(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    let (w_adl, w_fall) = (T::lit(weights.adl), T::lit(weights.fall));
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let w = if t == T::one() { w_fall } else { w_adl };
            w * (p - t) / n
        })
        .collect())
}
