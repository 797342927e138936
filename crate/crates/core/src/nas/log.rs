//! Trial log CSV and the selection rule applied to it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLogEntry {
    pub index: usize,
    pub memory_kb: f64,
    pub val_f1: f64,
    pub rejected_count: usize,
    pub spec_digest: String,
}

/// Highest F1; ties go to smaller memory, then lower index.
pub fn select_best(log: &[TrialLogEntry]) -> Option<usize> {
    log.iter()
        .min_by(|a, b| {
            b.val_f1
                .total_cmp(&a.val_f1)
                .then(a.memory_kb.total_cmp(&b.memory_kb))
                .then(a.index.cmp(&b.index))
        })
        .map(|e| e.index)
}

pub fn trial_log_csv(log: &[TrialLogEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in log {
        w.serialize(e)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

pub fn write_trial_log(log: &[TrialLogEntry], path: &Path) -> Result<()> {
    write_atomic(path, &trial_log_csv(log)?)
}

pub fn read_trial_log(path: &Path) -> Result<Vec<TrialLogEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|e| e.map_err(Error::from)).collect()
}
