//! Bit-exact binary checkpoint format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   4 bytes  "RDGN"
//! version u16      1
//! layers  u16      layer count
//! per layer: u8 kind tag, then its u32 shape fields
//!   0 Conv     kernel_h, kernel_w, in_channels, out_channels, stride
//!   1 Relu     -
//!   2 MaxPool  size
//!   3 AvgPool  size
//!   4 Flatten  -
//!   5 Dense    in_dim, out_dim
//!   6 Softmax  -
//! then, for each parametric layer in declaration order:
//!   weights as f32 LE (row-major), then bias as f32 LE
//! ```
//!
//! `load_checkpoint(save_checkpoint(m))` is the identity, bit for bit.

use std::fs;
use std::path::Path;

use super::model::{LayerSpec, ModelParams, ModelSpec, ParamPair};
use super::tensor::Tensor;
use super::NnError;

const MAGIC: &[u8; 4] = b"RDGN";
const VERSION: u16 = 1;

/// Serialize a model to bytes.
pub fn encode_checkpoint(spec: &ModelSpec, params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.layers().len() as u16).to_le_bytes());
    for layer in spec.layers() {
        match *layer {
            LayerSpec::Conv {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                stride,
            } => {
                out.push(0);
                for field in [kernel_h, kernel_w, in_channels, out_channels, stride] {
                    out.extend_from_slice(&(field as u32).to_le_bytes());
                }
            }
            LayerSpec::Relu => out.push(1),
            LayerSpec::MaxPool { size } => {
                out.push(2);
                out.extend_from_slice(&(size as u32).to_le_bytes());
            }
            LayerSpec::AvgPool { size } => {
                out.push(3);
                out.extend_from_slice(&(size as u32).to_le_bytes());
            }
            LayerSpec::Flatten => out.push(4),
            LayerSpec::Dense { in_dim, out_dim } => {
                out.push(5);
                out.extend_from_slice(&(in_dim as u32).to_le_bytes());
                out.extend_from_slice(&(out_dim as u32).to_le_bytes());
            }
            LayerSpec::Softmax => out.push(6),
        }
    }
    for entry in params.entries().iter().flatten() {
        for &v in entry.weights.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in entry.bias.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(spec: &ModelSpec, params: &ModelParams, path: &Path) -> Result<(), NnError> {
    fs::write(path, encode_checkpoint(spec, params)).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, ModelParams), NnError> {
    let bytes = fs::read(path).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    decode_checkpoint(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::TruncatedCheckpoint {
                at_byte: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn f32_vec(&mut self, count: usize) -> Result<Vec<f32>, NnError> {
        let raw = self.take(4 * count)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decode a checkpoint from bytes.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelSpec, ModelParams), NnError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(NnError::VersionMismatch {
            found: version,
            supported: VERSION,
        });
    }
    let layer_count = r.u16()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = r.u8()?;
        let layer = match tag {
            0 => LayerSpec::Conv {
                kernel_h: r.u32()? as usize,
                kernel_w: r.u32()? as usize,
                in_channels: r.u32()? as usize,
                out_channels: r.u32()? as usize,
                stride: r.u32()? as usize,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::MaxPool {
                size: r.u32()? as usize,
            },
            3 => LayerSpec::AvgPool {
                size: r.u32()? as usize,
            },
            4 => LayerSpec::Flatten,
            5 => LayerSpec::Dense {
                in_dim: r.u32()? as usize,
                out_dim: r.u32()? as usize,
            },
            6 => LayerSpec::Softmax,
            other => return Err(NnError::InvalidLayerTag(other)),
        };
        layers.push(layer);
    }
    let spec = ModelSpec::new(layers)?;

    let entries = spec
        .layers()
        .iter()
        .map(|layer| -> Result<Option<ParamPair>, NnError> {
            match *layer {
                LayerSpec::Conv {
                    kernel_h,
                    kernel_w,
                    in_channels,
                    out_channels,
                    ..
                } => {
                    let w_len = out_channels * in_channels * kernel_h * kernel_w;
                    let weights = Tensor::new(
                        vec![out_channels, in_channels, kernel_h, kernel_w],
                        r.f32_vec(w_len)?,
                    );
                    let bias = Tensor::new(vec![out_channels], r.f32_vec(out_channels)?);
                    Ok(Some(ParamPair { weights, bias }))
                }
                LayerSpec::Dense { in_dim, out_dim } => {
                    let weights = Tensor::new(vec![out_dim, in_dim], r.f32_vec(out_dim * in_dim)?);
                    let bias = Tensor::new(vec![out_dim], r.f32_vec(out_dim)?);
                    Ok(Some(ParamPair { weights, bias }))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    if r.pos != bytes.len() {
        return Err(NnError::TrailingCheckpointBytes {
            extra: bytes.len() - r.pos,
        });
    }
    Ok((spec, ModelParams::from_entries(entries)))
}
