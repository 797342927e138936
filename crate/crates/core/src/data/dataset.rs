use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accelerometer x/y/z followed by gyroscope x/y/z.
pub const CHANNELS: usize = 6;

pub type Sample = [f64; CHANNELS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Amputee,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Amputee => "amputee",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorSide {
    Left,
    Right,
}

impl SensorSide {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorSide::Left => "left",
            SensorSide::Right => "right",
        }
    }

    pub fn other(self) -> Self {
        match self {
            SensorSide::Left => SensorSide::Right,
            SensorSide::Right => SensorSide::Left,
        }
    }
}

/// Per-sample class label.
pub const ADL: u8 = 0;
pub const FALL: u8 = 1;

/// One shank-mounted IMU recording with its per-sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSignal {
    pub side: SensorSide,
    pub samples: Vec<Sample>,
    pub labels: Vec<u8>,
}

impl SensorSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub id: String,
    pub group: Group,
    pub sensors: Vec<SensorSignal>,
    /// The sensor used when this participant is in a validation or test set:
    /// the prosthetic side for amputees, the non-dominant side for controls.
    pub designated: SensorSide,
}

impl Participant {
    pub fn sensor(&self, side: SensorSide) -> Option<&SensorSignal> {
        self.sensors.iter().find(|s| s.side == side)
    }

    pub fn designated_sensor(&self) -> &SensorSignal {
        self.sensor(self.designated)
            .expect("validated participant has its designated sensor")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub participants: Vec<Participant>,
    pub sample_rate_hz: u32,
}

impl TimeSeriesDataset {
    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn count(&self, group: Group) -> usize {
        self.participants.iter().filter(|p| p.group == group).count()
    }

    /// Checks the structural invariants: unique ids, one or two distinct
    /// sensors, designated sensor present, labels aligned and binary, finite values.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.participants {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Data(format!("duplicate participant id `{}`", p.id)));
            }
            if p.sensors.is_empty() || p.sensors.len() > 2 {
                return Err(Error::Data(format!("participant `{}` needs 1 or 2 sensors", p.id)));
            }
            if p.sensors.len() == 2 && p.sensors[0].side == p.sensors[1].side {
                return Err(Error::Data(format!("participant `{}` repeats a sensor side", p.id)));
            }
            if p.sensor(p.designated).is_none() {
                return Err(Error::Data(format!(
                    "participant `{}` lacks designated sensor {}",
                    p.id,
                    p.designated.as_str()
                )));
            }
            for s in &p.sensors {
                if s.samples.len() != s.labels.len() {
                    return Err(Error::Data(format!(
                        "participant `{}` sensor {}: {} samples but {} labels",
                        p.id,
                        s.side.as_str(),
                        s.samples.len(),
                        s.labels.len()
                    )));
                }
                if s.labels.iter().any(|&l| l > FALL) {
                    return Err(Error::Data(format!("participant `{}` has a non-binary label", p.id)));
                }
                if s.samples.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("participant `{}` has non-finite samples", p.id)));
                }
            }
        }
        Ok(())
    }
}
