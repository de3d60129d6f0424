//! `RMDL` model files (little-endian):
//!
//! ```text
//! "RMDL" | version u8 = 1 | count u16
//! per tensor: name_len u8 | name (UTF-8) | ndim u8 | ndim x u32 shape | f32 payload
//! ```
//!
//! Besides the six parameter tensors the file carries `in_channels` and
//! `embed_dim` as one-element tensors. Values are stored as `f32`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::params::TENSOR_NAMES;
use super::{ConvBlockParams, HeadConfig, ModelError, Result};

pub const RMDL_MAGIC: [u8; 4] = *b"RMDL";
const VERSION: u8 = 1;

fn push_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], values: impl Iterator<Item = f32>) {
    out.push(name.len() as u8);
    out.extend_from_slice(name.as_bytes());
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(p: &ConvBlockParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&RMDL_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(TENSOR_NAMES.len() as u16 + 2).to_le_bytes());
    for ((name, shape), t) in TENSOR_NAMES.iter().zip(p.shapes()).zip(p.tensors()) {
        push_tensor(&mut out, name, &shape, t.iter().map(|&v| v as f32));
    }
    push_tensor(&mut out, "in_channels", &[1], std::iter::once(p.config.in_channels as f32));
    push_tensor(&mut out, "embed_dim", &[1], std::iter::once(p.config.embed_dim as f32));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ModelError::Truncated(self.bytes.len())),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ConvBlockParams> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != RMDL_MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let version = cur.u8()?;
    if version != VERSION {
        return Err(ModelError::Version(version));
    }
    let count = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());

    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    for _ in 0..count {
        let len = cur.u8()? as usize;
        let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| ModelError::Tensor {
            name: "?".into(),
            problem: "name is not UTF-8".into(),
        })?;
        let ndim = cur.u8()? as usize;
        let shape = (0..ndim).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| ModelError::Tensor {
            name: name.clone(),
            problem: "shape overflows".into(),
        })?;
        let payload = cur.take(n.checked_mul(4).ok_or(ModelError::Truncated(bytes.len()))?)?;
        let values = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if tensors.insert(name.clone(), (shape, values)).is_some() {
            return Err(ModelError::Tensor {
                name,
                problem: "duplicate tensor".into(),
            });
        }
    }

    let scalar = |name: &str| -> Result<usize> {
        match tensors.get(name) {
            Some((_, v)) if v.len() == 1 && v[0] >= 1.0 && v[0].fract() == 0.0 => Ok(v[0] as usize),
            Some(_) => Err(ModelError::Tensor {
                name: name.into(),
                problem: "expected a positive integer scalar".into(),
            }),
            None => Err(ModelError::Tensor {
                name: name.into(),
                problem: "missing".into(),
            }),
        }
    };
    let len_of = |name: &str| -> Result<usize> {
        tensors.get(name).map(|(_, v)| v.len()).ok_or_else(|| ModelError::Tensor {
            name: name.into(),
            problem: "missing".into(),
        })
    };
    let config = HeadConfig {
        in_channels: scalar("in_channels")?,
        conv1_channels: len_of("conv1.bias")?,
        conv2_channels: len_of("conv2.bias")?,
        embed_dim: scalar("embed_dim")?,
    };
    config.validate()?;

    let mut params = ConvBlockParams::zeros(config);
    let shapes = params.shapes();
    for ((name, shape), dst) in TENSOR_NAMES.iter().zip(shapes).zip(params.tensors_mut()) {
        let (got_shape, values) = tensors.get(*name).ok_or_else(|| ModelError::Tensor {
            name: name.to_string(),
            problem: "missing".into(),
        })?;
        if *got_shape != shape {
            return Err(ModelError::Tensor {
                name: name.to_string(),
                problem: format!("shape {got_shape:?}, expected {shape:?}"),
            });
        }
        *dst = values.iter().map(|&v| v as f64).collect();
    }
    if !params.is_finite() {
        return Err(ModelError::Tensor {
            name: "*".into(),
            problem: "non-finite value".into(),
        });
    }
    Ok(params)
}

pub fn write_model(path: impl AsRef<Path>, p: &ConvBlockParams) -> Result<()> {
    fs::write(path, encode_model(p))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ConvBlockParams> {
    decode_model(&fs::read(path)?)
}
