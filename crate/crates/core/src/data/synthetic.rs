//! Synthetic two-sensor IMU recordings with rare fall events.
//!
//! Activities of daily living are band-limited periodic motion (a gait-like
//! fundamental plus one harmonic) whose intensity and cadence change every
//! few seconds; falls are roughly one-second, high-frequency transients with
//! a Hann envelope. Every participant draws their own cadence, amplitude and
//! channel phases so held-out participants differ from the training pool.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Group, Participant, Sample, SensorSide, SensorSignal, TimeSeriesDataset, ADL, CHANNELS, FALL};
use super::segment::WindowConfig;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Nominal length of one fall event in samples at 100 Hz.
const FALL_SAMPLES: f64 = 100.0;
/// Shortest fall event; keeps every event long enough to dominate a window.
const MIN_FALL_SAMPLES: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub participants: usize,
    pub amputees: usize,
    /// ADL samples per fall sample.
    pub imbalance_ratio: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    /// Large, clean fall transients that any reasonable classifier separates.
    pub separable: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            participants: 35,
            amputees: 5,
            imbalance_ratio: 57.8,
            duration_s: 60.0,
            sample_rate_hz: 100,
            separable: false,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.participants == 0 {
            return Err(Error::Config("synthetic dataset needs at least one participant".into()));
        }
        if self.amputees > self.participants {
            return Err(Error::Config("more amputees than participants".into()));
        }
        if !self.imbalance_ratio.is_finite() || self.imbalance_ratio < 1.0 {
            return Err(Error::Config(format!(
                "imbalance ratio {} must be >= 1",
                self.imbalance_ratio
            )));
        }
        if self.sample_rate_hz == 0 || self.duration_s.is_nan() || self.duration_s <= 0.0 {
            return Err(Error::Config("duration and sample rate must be positive".into()));
        }
        Ok(())
    }

    fn total_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz as f64).round() as usize
    }
}

/// Per-participant motion profile.
struct Profile {
    cadence_hz: f64,
    amplitude: f64,
    phases: [f64; CHANNELS],
    gains: [f64; CHANNELS],
    noise: f64,
    /// Fall oscillation amplitude, before the per-event channel weights.
    fall_amplitude: f64,
    fall_freq_hz: f64,
    /// Constant-strength falls instead of a sin² swell, so every window
    /// that is mostly fall carries the full transient.
    flat_falls: bool,
    /// Overall gait level; lowered for separable data so fall energy
    /// dominates even in windows that are barely mostly fall.
    gait_scale: f64,
}

fn profile(rng: &mut Rng, separable: bool) -> Profile {
    let mut phases = [0.0; CHANNELS];
    let mut gains = [0.0; CHANNELS];
    for c in 0..CHANNELS {
        phases[c] = rng.gen_range(0.0..2.0 * PI);
        gains[c] = rng.gen_range(0.5..1.0);
    }
    let amplitude = rng.gen_range(0.6..1.4);
    Profile {
        cadence_hz: rng.gen_range(0.7..1.6),
        amplitude,
        phases,
        gains,
        noise: if separable { 0.03 } else { rng.gen_range(0.12..0.25) },
        // Separable falls sit well above the loudest gait any profile produces.
        fall_amplitude: if separable {
            6.0
        } else {
            amplitude * rng.gen_range(1.0..1.8)
        },
        fall_freq_hz: if separable { 7.0 } else { rng.gen_range(5.0..9.0) },
        flat_falls: separable,
        gait_scale: if separable { 0.3 } else { 1.0 },
    }
}

/// Lengths of the fall events and the ADL gaps around them, in timeline order.
fn layout(rng: &mut Rng, total: usize, ratio: f64) -> (Vec<usize>, Vec<usize>) {
    let fall_total = (total as f64 / (1.0 + ratio)).round().max(1.0) as usize;
    let events = ((fall_total as f64 / FALL_SAMPLES).round() as usize).max(1);
    let raw: Vec<f64> = (0..events).map(|_| rng.gen_range(0.85..1.15)).collect();
    let scale = fall_total as f64 / raw.iter().sum::<f64>();
    let mut lengths: Vec<usize> = raw.iter().map(|r| (r * scale).floor() as usize).collect();
    let short = fall_total - lengths.iter().sum::<usize>();
    lengths[events - 1] += short;
    lengths.iter_mut().for_each(|l| *l = (*l).max(MIN_FALL_SAMPLES));
    let fall_sum: usize = lengths.iter().sum();
    let adl_total = total.saturating_sub(fall_sum);
    let mut cuts: Vec<usize> = (0..events).map(|_| rng.gen_range(0..=adl_total)).collect();
    cuts.sort_unstable();
    let mut gaps = Vec::with_capacity(events + 1);
    let mut prev = 0;
    for c in cuts {
        gaps.push(c - prev);
        prev = c;
    }
    gaps.push(adl_total - prev);
    (lengths, gaps)
}

struct Event {
    start: usize,
    len: usize,
    weights: [f64; CHANNELS],
    phase: f64,
}

/// How one of the two sensors sees the shared motion.
struct Mount {
    phase_shift: f64,
    gain: f64,
    fall_amplitude: f64,
}

fn render(rng: &mut Rng, p: &Profile, rate: f64, total: usize, events: &[Event], mount: &Mount) -> Vec<Sample> {
    let noise = Normal::new(0.0, p.noise).expect("positive noise");
    let mut samples = vec![[0.0; CHANNELS]; total];
    // ADL: intensity and cadence change every few seconds.
    let mut t = 0;
    let mut phase = mount.phase_shift;
    while t < total {
        let seg = ((rng.gen_range(2.0..8.0) * rate) as usize).max(1).min(total - t);
        let intensity = [0.15, 0.6, 1.0, 1.0, 1.4][rng.gen_range(0..5)];
        let cadence = p.cadence_hz * rng.gen_range(0.8..1.25);
        for s in &mut samples[t..t + seg] {
            phase += 2.0 * PI * cadence / rate;
            for ((v, &ph), &g) in s.iter_mut().zip(&p.phases).zip(&p.gains) {
                let base = (phase + ph).sin() + 0.3 * (2.0 * phase + 1.7 * ph).sin();
                *v = mount.gain * p.gait_scale * p.amplitude * intensity * g * base;
            }
        }
        t += seg;
    }
    for e in events {
        for k in 0..e.len.min(total - e.start) {
            let env = if p.flat_falls {
                1.0
            } else {
                (PI * k as f64 / e.len as f64).sin().powi(2)
            };
            let osc = (2.0 * PI * p.fall_freq_hz * k as f64 / rate + e.phase).sin();
            for (v, &w) in samples[e.start + k].iter_mut().zip(&e.weights) {
                *v += mount.fall_amplitude * w * env * osc;
            }
        }
    }
    for s in &mut samples {
        for v in s.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    samples
}

fn participant(config: &SyntheticConfig, index: usize, group: Group) -> Participant {
    let mut rng = seed::rng(seed::derive(config.seed, index as u64));
    let rate = config.sample_rate_hz as f64;
    let total = config.total_samples();
    let p = profile(&mut rng, config.separable);
    let (lengths, gaps) = layout(&mut rng, total, config.imbalance_ratio);
    let mut events = Vec::with_capacity(lengths.len());
    let mut labels = vec![ADL; total];
    let mut cursor = 0;
    for (&len, gap) in lengths.iter().zip(&gaps) {
        cursor += gap;
        let (mut start, mut len) = (cursor, len);
        if config.separable {
            // Starts half a hop off the window grid and lengths a whole number
            // of hops: every boundary window then overlaps the fall by a
            // multiple of the hop plus half, never by exactly half a window.
            let hop = WindowConfig::default().stride().expect("default window is valid");
            start += (hop / 2 + hop - start % hop) % hop;
            len = len.div_ceil(hop) * hop;
        }
        let start = start.min(total);
        let end = (start + len).min(total);
        labels[start..end].fill(FALL);
        let mut weights = [0.0; CHANNELS];
        if p.flat_falls {
            weights = [1.0; CHANNELS];
        } else {
            weights
                .iter_mut()
                .for_each(|w| *w = rng.gen_range(0.6..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        }
        events.push(Event {
            start,
            len: end - start,
            weights,
            phase: rng.gen_range(0.0..2.0 * PI),
        });
        cursor = end;
    }
    let designated = if rng.gen_bool(0.5) {
        SensorSide::Left
    } else {
        SensorSide::Right
    };
    let other_gain = rng.gen_range(0.9..1.1);
    let other_fall = if p.flat_falls { 1.0 } else { rng.gen_range(0.7..1.0) };
    let primary = Mount {
        phase_shift: 0.0,
        gain: 1.0,
        fall_amplitude: p.fall_amplitude,
    };
    let secondary = Mount {
        phase_shift: PI,
        gain: other_gain,
        fall_amplitude: p.fall_amplitude * other_fall,
    };
    let primary = render(&mut rng, &p, rate, total, &events, &primary);
    let secondary = render(&mut rng, &p, rate, total, &events, &secondary);
    let id = match group {
        Group::Amputee => format!("A{}", index + 1),
        Group::Control => format!("C{}", index + 1),
    };
    Participant {
        id,
        group,
        sensors: vec![
            SensorSignal {
                side: designated,
                samples: primary,
                labels: labels.clone(),
            },
            SensorSignal {
                side: designated.other(),
                samples: secondary,
                labels,
            },
        ],
        designated,
    }
}

/// Generates a dataset; the first `amputees` participants are amputees.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<TimeSeriesDataset> {
    config.validate()?;
    if config.total_samples() < MIN_FALL_SAMPLES * 2 {
        return Err(Error::Config(format!(
            "duration of {} s is too short for a fall event",
            config.duration_s
        )));
    }
    let participants = (0..config.participants)
        .map(|i| {
            let group = if i < config.amputees {
                Group::Amputee
            } else {
                Group::Control
            };
            participant(config, i, group)
        })
        .collect();
    Ok(TimeSeriesDataset {
        participants,
        sample_rate_hz: config.sample_rate_hz,
    })
}
