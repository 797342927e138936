//! Sliding-window segmentation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::{Sample, CHANNELS, FALL};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub length: usize,
    pub overlap: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            length: 120,
            overlap: 0.9,
        }
    }
}

impl WindowConfig {
    /// Hop between consecutive window starts: round(length x (1 - overlap)).
    pub fn stride(&self) -> Result<usize> {
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidArgument(format!(
                "overlap {} outside [0, 1)",
                self.overlap
            )));
        }
        if self.length == 0 {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        let stride = (self.length as f64 * (1.0 - self.overlap)).round() as usize;
        if stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "overlap {} leaves a zero stride for length {}",
                self.overlap, self.length
            )));
        }
        Ok(stride)
    }

    /// Start offsets of every complete window in a signal of `total` samples.
    pub fn starts(&self, total: usize) -> Result<std::iter::StepBy<std::ops::RangeInclusive<usize>>> {
        let stride = self.stride()?;
        if total < self.length {
            return Err(Error::Data(format!(
                "signal of {total} samples is shorter than the {}-sample window",
                self.length
            )));
        }
        Ok((0..=total - self.length).step_by(stride))
    }

    pub fn count(&self, total: usize) -> Result<usize> {
        let stride = self.stride()?;
        if total < self.length {
            return Ok(0);
        }
        Ok((total - self.length) / stride + 1)
    }
}

/// A labelled slice of one sensor signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Row-major `length x 6` values.
    pub data: Vec<f32>,
    pub label: u8,
    pub participant_id: Arc<str>,
    pub start_index: usize,
}

/// Fall iff strictly more than half of the window's samples are falls.
pub fn window_label(labels: &[u8]) -> u8 {
    let falls = labels.iter().filter(|&&l| l == FALL).count();
    u8::from(falls * 2 > labels.len())
}

pub fn segment(
    samples: &[Sample],
    labels: &[u8],
    config: WindowConfig,
    participant_id: &Arc<str>,
) -> Result<Vec<Window>> {
    if samples.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    Ok(config
        .starts(samples.len())?
        .map(|start| {
            let end = start + config.length;
            Window {
                data: samples[start..end]
                    .iter()
                    .flat_map(|s| s.iter().map(|&v| v as f32))
                    .collect(),
                label: window_label(&labels[start..end]),
                participant_id: participant_id.clone(),
                start_index: start,
            }
        })
        .collect())
}

/// A collection of windows with batch extraction helpers.
#[derive(Debug, Clone, Default)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub length: usize,
}

impl WindowSet {
    pub fn new(windows: Vec<Window>, length: usize) -> Self {
        Self { windows, length }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn fall_count(&self) -> usize {
        self.windows.iter().filter(|w| w.label == FALL).count()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.windows.iter().map(|w| w.label).collect()
    }

    /// `[indices.len(), length, 6]` tensor of the selected windows.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> Tensor<T> {
        let mut data = Vec::with_capacity(indices.len() * self.length * CHANNELS);
        for &i in indices {
            data.extend(self.windows[i].data.iter().map(|&v| T::from_f32(v).unwrap()));
        }
        Tensor::new(vec![indices.len(), self.length, CHANNELS], data).expect("window batch shape")
    }

    pub fn targets<T: Real>(&self, indices: &[usize]) -> Vec<T> {
        indices
            .iter()
            .map(|&i| {
                if self.windows[i].label == FALL {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn extend(&mut self, other: WindowSet) {
        self.windows.extend(other.windows);
    }

    /// Keeps every fall window and a uniform random subset of ADL windows so
    /// that at most `max` windows remain (never fewer than the fall count).
    /// Original order is preserved.
    pub fn subsample(&self, max: usize, seed: u64) -> WindowSet {
        if self.len() <= max {
            return self.clone();
        }
        let adl: Vec<usize> = (0..self.len()).filter(|&i| self.windows[i].label != FALL).collect();
        let keep_adl = max.saturating_sub(self.fall_count());
        let mut rng = crate::seed::rng(seed);
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, adl.len(), keep_adl.min(adl.len()))
            .into_iter()
            .map(|i| adl[i])
            .collect();
        chosen.extend((0..self.len()).filter(|&i| self.windows[i].label == FALL));
        chosen.sort_unstable();
        WindowSet::new(
            chosen.into_iter().map(|i| self.windows[i].clone()).collect(),
            self.length,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize) -> (Vec<Sample>, Vec<u8>) {
        let samples = (0..n).map(|i| [i as f64, 0.0, 0.0, 0.0, 0.0, -(i as f64)]).collect();
        (samples, vec![0; n])
    }

    #[test]
    fn default_stride_is_twelve() {
        assert_eq!(WindowConfig::default().stride().unwrap(), 12);
    }

    #[test]
    fn counts_for_reference_lengths() {
        let id: Arc<str> = "p".into();
        let (s, l) = signal(240);
        let w = segment(&s, &l, WindowConfig::default(), &id).unwrap();
        assert_eq!(w.len(), 11);
        assert_eq!(w[1].start_index, 12);
        let (s, l) = signal(120);
        assert_eq!(segment(&s, &l, WindowConfig::default(), &id).unwrap().len(), 1);
        let (s, l) = signal(360);
        let cfg = WindowConfig {
            length: 120,
            overlap: 0.0,
        };
        let w = segment(&s, &l, cfg, &id).unwrap();
        assert_eq!(w.iter().map(|w| w.start_index).collect::<Vec<_>>(), vec![0, 120, 240]);
    }

    #[test]
    fn short_signal_is_an_error() {
        let (s, l) = signal(119);
        assert!(segment(&s, &l, WindowConfig::default(), &"p".into()).is_err());
    }

    #[test]
    fn windows_copy_source_values() {
        let (s, l) = signal(300);
        let w = segment(&s, &l, WindowConfig::default(), &"p".into()).unwrap();
        let win = &w[3];
        for (i, row) in win.data.chunks(CHANNELS).enumerate() {
            for (&got, &src) in row.iter().zip(&s[win.start_index + i]) {
                assert_eq!(got, src as f32);
            }
        }
    }

    #[test]
    fn strict_majority_label() {
        let mut labels = vec![0u8; 120];
        labels[..60].fill(1);
        assert_eq!(window_label(&labels), 0);
        labels[60] = 1;
        assert_eq!(window_label(&labels), 1);
    }

    #[test]
    fn invalid_overlap() {
        let cfg = WindowConfig {
            length: 120,
            overlap: 1.0,
        };
        assert!(cfg.stride().is_err());
        let cfg = WindowConfig {
            length: 10,
            overlap: 0.99,
        };
        assert!(cfg.stride().is_err());
    }
}
