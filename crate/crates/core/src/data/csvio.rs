//! CSV ingestion and export.
//!
//! Header: `participant_id,group,sensor,ax,ay,az,gx,gy,gz,label`, one row per
//! sample per sensor, time-ordered within each (participant, sensor) pair.
//! A participant's designated sensor is the first of its sensors to appear.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Group, Participant, SensorSide, SensorSignal, TimeSeriesDataset, CHANNELS};
use crate::error::{Error, Result};

pub const HEADER: [&str; 10] = [
    "participant_id",
    "group",
    "sensor",
    "ax",
    "ay",
    "az",
    "gx",
    "gy",
    "gz",
    "label",
];

pub fn write_csv_to<W: Write>(dataset: &TimeSeriesDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    let mut fields: Vec<String> = Vec::with_capacity(HEADER.len());
    for p in &dataset.participants {
        let mut sensors: Vec<&SensorSignal> = p.sensors.iter().collect();
        sensors.sort_by_key(|s| s.side != p.designated);
        for s in sensors {
            for (sample, label) in s.samples.iter().zip(&s.labels) {
                fields.clear();
                fields.push(p.id.clone());
                fields.push(p.group.as_str().to_string());
                fields.push(s.side.as_str().to_string());
                fields.extend(sample.iter().map(|v| v.to_string()));
                fields.push(label.to_string());
                w.write_record(&fields)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(dataset: &TimeSeriesDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(dataset, std::io::BufWriter::new(file))
}

fn schema(row: usize, reason: impl Into<String>) -> Error {
    Error::Schema {
        row,
        reason: reason.into(),
    }
}

/// Parses a dataset. `row` numbers in errors count the header as row 1.
pub fn read_csv_from<R: Read>(reader: R, sample_rate_hz: u32) -> Result<TimeSeriesDataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let mut columns = [0usize; 10];
    for (slot, name) in columns.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| schema(1, format!("missing column `{name}`")))?;
    }
    let mut order: Vec<String> = Vec::new();
    let mut participants: HashMap<String, Participant> = HashMap::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let field = |k: usize| record.get(columns[k]).map(str::trim).unwrap_or("");
        let id = field(0);
        if id.is_empty() {
            return Err(schema(row, "empty participant_id"));
        }
        let group = match field(1) {
            "control" => Group::Control,
            "amputee" => Group::Amputee,
            other => return Err(schema(row, format!("group `{other}` is not control or amputee"))),
        };
        let side = match field(2) {
            "left" => SensorSide::Left,
            "right" => SensorSide::Right,
            other => return Err(schema(row, format!("sensor `{other}` is not left or right"))),
        };
        let mut sample = [0.0; CHANNELS];
        for (c, v) in sample.iter_mut().enumerate() {
            let text = field(3 + c);
            *v = text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                schema(
                    row,
                    format!("`{}` value `{text}` is not a finite number", HEADER[3 + c]),
                )
            })?;
        }
        let label = match field(9) {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(schema(row, format!("label `{other}` must be 0 or 1"))),
        };
        let p = participants.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            Participant {
                id: id.to_string(),
                group,
                sensors: Vec::new(),
                designated: side,
            }
        });
        if p.group != group {
            return Err(schema(row, format!("participant `{id}` changes group")));
        }
        let signal = match p.sensors.iter_mut().position(|s| s.side == side) {
            Some(k) => &mut p.sensors[k],
            None => {
                p.sensors.push(SensorSignal {
                    side,
                    samples: Vec::new(),
                    labels: Vec::new(),
                });
                p.sensors.last_mut().expect("just pushed")
            }
        };
        signal.samples.push(sample);
        signal.labels.push(label);
    }
    let dataset = TimeSeriesDataset {
        participants: order
            .into_iter()
            .map(|id| participants.remove(&id).expect("ordered id present"))
            .collect(),
        sample_rate_hz,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_csv(path: &Path) -> Result<TimeSeriesDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(std::io::BufReader::new(file), 100)
}
