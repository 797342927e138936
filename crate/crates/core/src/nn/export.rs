//! Little-endian binary model container.
//!
//! ```text
//! "MNAS" | u16 version | u8 pipeline | u16 layer count | u16 input len | u16 input channels
//! per layer: u8 tag | u16 size | u8 kernel | u8 stride | u8 padding | u8 activation
//!            | u8 pool kind | u8 reserved | f64 dropout rate
//! per weight tensor, in layer then parameter order:
//!   version 1: u32 count | count × f32
//!   version 2: u32 count | ceil(count/8) bitmap bytes (LSB first, 1 = nonzero)
//!              | u32 nonzero count | nonzero × f32
//! ```
//!
//! Flat inputs are stored with input len 0 and the feature count as channels.
//! Loading a version 2 file restores pruning masks on prunable kernels.

use std::io::{Read, Write};
use std::path::Path;

use super::layer::Layer;
use super::model::Model;
use crate::error::{Error, Result};
use crate::seed;
use crate::space::{Activation, ArchitectureSpec, FeatureShape, LayerDescriptor, Padding, Pipeline, PoolKind};
use crate::tensor::{Real, Tensor};

pub const MAGIC: &[u8; 4] = b"MNAS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dense,
    Sparse,
}

impl ExportFormat {
    pub fn version(self) -> u16 {
        match self {
            ExportFormat::Dense => 1,
            ExportFormat::Sparse => 2,
        }
    }
}

#[derive(Default)]
struct Record {
    tag: u8,
    size: u16,
    kernel: u8,
    stride: u8,
    padding: u8,
    activation: u8,
    pool_kind: u8,
    rate: f64,
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Sigmoid => 2,
        Activation::Linear => 3,
    }
}

fn activation_from(code: u8) -> Result<Activation> {
    Ok(match code {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        2 => Activation::Sigmoid,
        3 => Activation::Linear,
        _ => return Err(Error::Format(format!("unknown activation code {code}"))),
    })
}

fn narrow<U: TryFrom<usize>>(v: usize, what: &str) -> Result<U> {
    U::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit the record field")))
}

fn encode(d: &LayerDescriptor) -> Result<Record> {
    Ok(match *d {
        LayerDescriptor::BatchNorm => Record {
            tag: 1,
            ..Default::default()
        },
        LayerDescriptor::Conv1d {
            filters,
            kernel,
            stride,
            padding,
            activation,
        } => Record {
            tag: 2,
            size: narrow(filters, "filters")?,
            kernel: narrow(kernel, "kernel")?,
            stride: narrow(stride, "stride")?,
            padding: match padding {
                Padding::Same => 0,
                Padding::Valid => 1,
            },
            activation: activation_code(activation),
            ..Default::default()
        },
        LayerDescriptor::Gru { units } => Record {
            tag: 3,
            size: narrow(units, "units")?,
            ..Default::default()
        },
        LayerDescriptor::Pool { kind, length } => Record {
            tag: 4,
            size: narrow(length, "pool length")?,
            pool_kind: match kind {
                PoolKind::Max => 0,
                PoolKind::Avg => 1,
            },
            ..Default::default()
        },
        LayerDescriptor::GlobalAvgPool => Record {
            tag: 5,
            ..Default::default()
        },
        LayerDescriptor::Flatten => Record {
            tag: 6,
            ..Default::default()
        },
        LayerDescriptor::Dropout { rate } => Record {
            tag: 7,
            rate,
            ..Default::default()
        },
        LayerDescriptor::Dense { units, activation } => Record {
            tag: 8,
            size: narrow(units, "units")?,
            activation: activation_code(activation),
            ..Default::default()
        },
    })
}

fn decode(r: &Record) -> Result<LayerDescriptor> {
    let size = r.size as usize;
    Ok(match r.tag {
        1 => LayerDescriptor::BatchNorm,
        2 => LayerDescriptor::Conv1d {
            filters: size,
            kernel: r.kernel as usize,
            stride: r.stride as usize,
            padding: match r.padding {
                0 => Padding::Same,
                1 => Padding::Valid,
                p => return Err(Error::Format(format!("unknown padding code {p}"))),
            },
            activation: activation_from(r.activation)?,
        },
        3 => LayerDescriptor::Gru { units: size },
        4 => LayerDescriptor::Pool {
            kind: match r.pool_kind {
                0 => PoolKind::Max,
                1 => PoolKind::Avg,
                k => return Err(Error::Format(format!("unknown pool kind {k}"))),
            },
            length: size,
        },
        5 => LayerDescriptor::GlobalAvgPool,
        6 => LayerDescriptor::Flatten,
        7 => LayerDescriptor::Dropout { rate: r.rate },
        8 => LayerDescriptor::Dense {
            units: size,
            activation: activation_from(r.activation)?,
        },
        t => return Err(Error::Format(format!("unknown layer tag {t}"))),
    })
}

/// Serialises `model` as 32-bit weights.
pub fn save_model_to<T: Real, W: Write>(model: &Model<T>, format: ExportFormat, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&format.version().to_le_bytes());
    buf.push(match model.spec().pipeline {
        Pipeline::Cnn => 0,
        Pipeline::Gru => 1,
    });
    buf.extend_from_slice(&narrow::<u16>(model.layers().len(), "layer count")?.to_le_bytes());
    let (len, ch) = match model.input_shape() {
        FeatureShape::Seq { len, channels } => (len, channels),
        FeatureShape::Flat(n) => (0, n),
    };
    buf.extend_from_slice(&narrow::<u16>(len, "input length")?.to_le_bytes());
    buf.extend_from_slice(&narrow::<u16>(ch, "input channels")?.to_le_bytes());
    for layer in model.layers() {
        let r = encode(&layer.descriptor)?;
        buf.push(r.tag);
        buf.extend_from_slice(&r.size.to_le_bytes());
        buf.extend_from_slice(&[r.kernel, r.stride, r.padding, r.activation, r.pool_kind, 0]);
        buf.extend_from_slice(&r.rate.to_le_bytes());
    }
    for p in model.layers().iter().flat_map(|l| &l.params) {
        let values: Vec<f32> = p.value.data().iter().map(|v| v.to_f32().unwrap()).collect();
        buf.extend_from_slice(&narrow::<u32>(values.len(), "tensor size")?.to_le_bytes());
        match format {
            ExportFormat::Dense => {
                for v in &values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            ExportFormat::Sparse => {
                let mut bitmap = vec![0u8; values.len().div_ceil(8)];
                let mut nonzero = Vec::new();
                for (i, &v) in values.iter().enumerate() {
                    if v != 0.0 {
                        bitmap[i / 8] |= 1 << (i % 8);
                        nonzero.push(v);
                    }
                }
                buf.extend_from_slice(&bitmap);
                buf.extend_from_slice(&(nonzero.len() as u32).to_le_bytes());
                for v in nonzero {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    w.write_all(&buf)
        .map_err(|e| Error::Format(format!("write failed: {e}")))
}

/// Writes atomically: a sibling temporary file is renamed into place.
pub fn save_model<T: Real>(model: &Model<T>, format: ExportFormat, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    save_model_to(model, format, &mut buf)?;
    crate::io::write_atomic(path, &buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file: needed {n} bytes at offset {}", self.pos)))?;
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
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses a model from bytes in either format version.
pub fn load_model_from<T: Real, R: Read>(mut r: R) -> Result<Model<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("read failed: {e}")))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = c.u16()?;
    if version != 1 && version != 2 {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let pipeline = match c.u8()? {
        0 => Pipeline::Cnn,
        1 => Pipeline::Gru,
        p => return Err(Error::Format(format!("unknown pipeline code {p}"))),
    };
    let n_layers = c.u16()? as usize;
    let len = c.u16()? as usize;
    let channels = c.u16()? as usize;
    let input = if len == 0 {
        FeatureShape::Flat(channels)
    } else {
        FeatureShape::Seq { len, channels }
    };
    let mut descriptors = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = c.u8()?;
        let size = c.u16()?;
        let f = c.take(6)?;
        let rate = c.f64()?;
        descriptors.push(decode(&Record {
            tag,
            size,
            kernel: f[0],
            stride: f[1],
            padding: f[2],
            activation: f[3],
            pool_kind: f[4],
            rate,
        })?);
    }
    let spec = ArchitectureSpec::new(pipeline, descriptors);
    // Weights are overwritten below; the seed only satisfies the constructor.
    let mut model = Model::<T>::new(spec, input, seed::derive_labeled(0, "load"))?;
    for (li, layer) in model.layers_mut().iter_mut().enumerate() {
        read_layer(&mut c, layer, version).map_err(|e| e.context(format!("layer {li}")))?;
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(model)
}

fn read_layer<T: Real>(c: &mut Cursor<'_>, layer: &mut Layer<T>, version: u16) -> Result<()> {
    for p in &mut layer.params {
        let count = c.u32()? as usize;
        if count != p.value.len() {
            return Err(Error::Format(format!(
                "tensor `{}` has {count} values, expected {}",
                p.name,
                p.value.len()
            )));
        }
        let mut values = vec![0f32; count];
        if version == 1 {
            for v in &mut values {
                *v = c.f32()?;
            }
        } else {
            let bitmap = c.take(count.div_ceil(8))?;
            let set: Vec<bool> = (0..count).map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1).collect();
            let nnz = c.u32()? as usize;
            if nnz != set.iter().filter(|b| **b).count() {
                return Err(Error::Format(format!(
                    "tensor `{}` bitmap disagrees with nonzero count",
                    p.name
                )));
            }
            for (v, &keep) in values.iter_mut().zip(&set) {
                if keep {
                    *v = c.f32()?;
                }
            }
            if p.prunable && set.iter().any(|b| !b) {
                p.mask = Some(set);
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("tensor `{}` contains non-finite values", p.name)));
        }
        let shape = p.value.shape().to_vec();
        p.value = Tensor::new(shape, values.into_iter().map(|v| T::from_f32(v).unwrap()).collect())?;
    }
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<Model<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_model_from(std::io::BufReader::new(file)).map_err(|e| e.context(format!("loading {}", path.display())))
}
