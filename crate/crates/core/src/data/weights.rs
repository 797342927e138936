use serde::{Deserialize, Serialize};

use super::segment::Window;
use crate::error::{Error, Result};

/// Inverse-frequency class weights n / (k n_i) with k = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub adl: f64,
    pub fall: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { adl: 1.0, fall: 1.0 };

    pub fn from_counts(n_adl: usize, n_fall: usize) -> Result<Self> {
        if n_adl == 0 || n_fall == 0 {
            return Err(Error::Data(format!(
                "class weights need both classes (ADL {n_adl}, Fall {n_fall})"
            )));
        }
        let n = (n_adl + n_fall) as f64;
        Ok(Self {
            adl: n / (2.0 * n_adl as f64),
            fall: n / (2.0 * n_fall as f64),
        })
    }

    pub fn for_label(&self, label: u8) -> f64 {
        if label == super::dataset::FALL {
            self.fall
        } else {
            self.adl
        }
    }
}

pub fn class_weights(windows: &[Window]) -> Result<ClassWeights> {
    let falls = windows.iter().filter(|w| w.label == super::dataset::FALL).count();
    ClassWeights::from_counts(windows.len() - falls, falls)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_imbalance() {
        let w = ClassWeights::from_counts(983, 17).unwrap();
        assert!((w.fall - 29.4118).abs() < 1e-4, "{}", w.fall);
        assert!((w.adl - 0.50865).abs() < 1e-5, "{}", w.adl);
    }

    #[test]
    fn balanced_is_unit() {
        assert_eq!(ClassWeights::from_counts(100, 100).unwrap(), ClassWeights::UNIT);
    }

    #[test]
    fn missing_class_rejected() {
        assert!(ClassWeights::from_counts(10, 0).is_err());
        assert!(ClassWeights::from_counts(0, 10).is_err());
    }

    #[test]
    fn weighted_counts_sum_to_total() {
        for (a, f) in [(983, 17), (5, 1), (1, 1000), (37, 41)] {
            let w = ClassWeights::from_counts(a, f).unwrap();
            let total = a as f64 * w.adl + f as f64 * w.fall;
            assert!((total - (a + f) as f64).abs() < 1e-9);
        }
    }
}
