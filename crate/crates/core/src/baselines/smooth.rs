//! Majority-vote smoothing of per-sample predictions into per-window
//! decisions.

use crate::data::{segment::window_label, WindowConfig};
use crate::error::{Error, Result};

/// One decision per window start: fall iff strictly more than half of the
/// window's predictions are falls. Window starts match segmentation.
pub fn smooth_predictions(predictions: &[u8], config: WindowConfig) -> Result<Vec<u8>> {
    if predictions.len() < config.length {
        return Err(Error::Data(format!(
            "{} predictions cannot fill one {}-sample window",
            predictions.len(),
            config.length
        )));
    }
    Ok(config
        .starts(predictions.len())?
        .map(|s| window_label(&predictions[s..s + config.length]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_ones(n: usize) -> Vec<u8> {
        (0..120).map(|i| u8::from(i < n)).collect()
    }

    #[test]
    fn strict_majority() {
        let cfg = WindowConfig::default();
        assert_eq!(smooth_predictions(&with_ones(61), cfg).unwrap(), vec![1]);
        assert_eq!(smooth_predictions(&with_ones(60), cfg).unwrap(), vec![0]);
    }

    #[test]
    fn all_zero_stays_adl() {
        let out = smooth_predictions(&[0; 240], WindowConfig::default()).unwrap();
        assert_eq!(out.len(), 11);
        assert!(out.iter().all(|&v| v == 0));
    }

    #[test]
    fn too_short() {
        assert!(smooth_predictions(&[1; 119], WindowConfig::default()).is_err());
    }
}
