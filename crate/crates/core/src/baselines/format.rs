//! Binary ensemble container.
//!
//! Little-endian layout:
//! ```text
//! "MNEN"  u16 version=1  u8 kind (1 RUSBoost, 2 EasyEnsemble)
//! u16 n_estimators  u16 max_depth  f64 learning_rate  u8 max_features (0 sqrt, 1 log2, 2 all)
//! u32 n_bags  u32 learner_count
//! per learner: u32 bag  f64 weight  u32 fitted_adl  u32 fitted_fall  u32 node_count
//!   per node: u8 tag
//!     tag 0 (leaf):  f64 score
//!     tag 1 (split): u8 feature  f64 threshold  u32 left  u32 right
//! ```

use std::path::Path;

use super::ensemble::{EnsembleKind, EnsembleModel, Learner, TreeParams};
use super::tree::{MaxFeatures, Node, Tree};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MNEN";
pub const VERSION: u16 = 1;

fn kind_code(kind: EnsembleKind) -> u8 {
    match kind {
        EnsembleKind::RusBoost => 1,
        EnsembleKind::EasyEnsemble => 2,
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit the container")))
}

pub fn ensemble_to_bytes(model: &EnsembleModel) -> Result<Vec<u8>> {
    model.check()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_code(model.kind));
    let p = &model.params;
    out.extend_from_slice(&narrow::<u16>(p.n_estimators, "n_estimators")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(p.max_depth, "max_depth")?.to_le_bytes());
    out.extend_from_slice(&p.learning_rate.to_le_bytes());
    out.push(p.max_features.code());
    out.extend_from_slice(&narrow::<u32>(model.n_bags, "n_bags")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>(model.learners.len(), "learner count")?.to_le_bytes());
    for l in &model.learners {
        out.extend_from_slice(&l.bag.to_le_bytes());
        out.extend_from_slice(&l.weight.to_le_bytes());
        out.extend_from_slice(&l.fitted_adl.to_le_bytes());
        out.extend_from_slice(&l.fitted_fall.to_le_bytes());
        out.extend_from_slice(&narrow::<u32>(l.tree.nodes.len(), "node count")?.to_le_bytes());
        for node in &l.tree.nodes {
            match *node {
                Node::Leaf { score } => {
                    out.push(0);
                    out.extend_from_slice(&score.to_le_bytes());
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(1);
                    out.push(feature);
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn ensemble_from_bytes(bytes: &[u8]) -> Result<EnsembleModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not an ensemble file (bad magic)".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported ensemble version {version}")));
    }
    let kind = match c.u8()? {
        1 => EnsembleKind::RusBoost,
        2 => EnsembleKind::EasyEnsemble,
        k => return Err(Error::Format(format!("unknown ensemble kind {k}"))),
    };
    let n_estimators = c.u16()? as usize;
    let max_depth = c.u16()? as usize;
    let learning_rate = c.f64()?;
    let code = c.u8()?;
    let max_features =
        MaxFeatures::from_code(code).ok_or_else(|| Error::Format(format!("unknown max_features {code}")))?;
    let params = TreeParams {
        n_estimators,
        max_depth,
        learning_rate,
        max_features,
    };
    params.validate().map_err(|e| Error::Format(e.to_string()))?;
    let n_bags = c.u32()? as usize;
    let count = c.u32()? as usize;
    // Each learner occupies at least 33 bytes; reject absurd counts early.
    if count > bytes.len() / 33 {
        return Err(Error::Format(format!("learner count {count} exceeds file size")));
    }
    let mut learners = Vec::with_capacity(count);
    for _ in 0..count {
        let bag = c.u32()?;
        let weight = c.f64()?;
        let fitted_adl = c.u32()?;
        let fitted_fall = c.u32()?;
        let n_nodes = c.u32()? as usize;
        if n_nodes > bytes.len() / 9 {
            return Err(Error::Format(format!("node count {n_nodes} exceeds file size")));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(match c.u8()? {
                0 => Node::Leaf { score: c.f64()? },
                1 => Node::Split {
                    feature: c.u8()?,
                    threshold: c.f64()?,
                    left: c.u32()?,
                    right: c.u32()?,
                },
                t => return Err(Error::Format(format!("unknown node tag {t}"))),
            });
        }
        learners.push(Learner {
            bag,
            weight,
            tree: Tree { nodes },
            fitted_adl,
            fitted_fall,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let model = EnsembleModel {
        kind,
        params,
        n_bags,
        learners,
    };
    model.check()?;
    Ok(model)
}

pub fn save_ensemble(model: &EnsembleModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &ensemble_to_bytes(model)?)
}

pub fn load_ensemble(path: &Path) -> Result<EnsembleModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ensemble_from_bytes(&bytes).map_err(|e| e.context(format!("loading {}", path.display())))
}
