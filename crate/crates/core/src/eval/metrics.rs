//! Confusion counts and the fall-class / macro metric set.

use serde::{Deserialize, Serialize};

/// Positive class is Fall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    /// Counts from binary predictions against binary labels.
    pub fn from_binary(predicted: &[u8], labels: &[u8]) -> Self {
        let mut c = Self::default();
        for (&p, &t) in predicted.iter().zip(labels) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Thresholds probabilities at 0.5 (inclusive) before counting.
    pub fn from_probabilities(probs: &[f64], labels: &[u8]) -> Self {
        let predicted: Vec<u8> = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        Self::from_binary(&predicted, labels)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same matrix with ADL treated as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn add(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Fall-class and macro-averaged metrics. A ratio with a zero denominator is
/// reported as 0 and its name is recorded in `undefined`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub undefined: Vec<String>,
}

impl MetricSet {
    pub fn is_fully_defined(&self) -> bool {
        self.undefined.is_empty()
    }
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class precision, recall and F1; `prefix` names flagged entries.
fn class_metrics(c: &ConfusionCounts, prefix: &str, undefined: &mut Vec<String>) -> (f64, f64, f64) {
    let p = ratio(c.tp, c.tp + c.fp, &format!("{prefix}precision"), undefined);
    let r = ratio(c.tp, c.tp + c.fn_, &format!("{prefix}recall"), undefined);
    let f = f1_score(p, r);
    if p + r == 0.0 {
        undefined.push(format!("{prefix}f1"));
    }
    (p, r, f)
}

pub fn metrics(counts: &ConfusionCounts) -> MetricSet {
    let mut undefined = Vec::new();
    let (p, r, f) = class_metrics(counts, "", &mut undefined);
    let (ap, ar, af) = class_metrics(&counts.swapped(), "adl_", &mut undefined);
    MetricSet {
        precision: p,
        recall: r,
        f1: f,
        macro_precision: (p + ap) / 2.0,
        macro_recall: (r + ar) / 2.0,
        macro_f1: (f + af) / 2.0,
        undefined,
    }
}
