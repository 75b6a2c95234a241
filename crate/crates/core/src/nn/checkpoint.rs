//! Binary checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//! `magic[4] | version | tag_count | tags… | tensor_count | (rows, cols)… | f64 data…`
//! Tensor data follows the header in declaration order as little-endian `f64`.

use std::io::{Read, Write};

use super::gcn::{Activation, GcnLayer, GcnModel, Head, LayerKind};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

pub const VERSION: u32 = 1;
pub const GCN_MAGIC: [u8; 4] = *b"GCNW";

pub fn write_tensors(
    w: &mut impl Write,
    magic: [u8; 4],
    tags: &[u32],
    tensors: &[&DenseMatrix],
) -> Result<()> {
    w.write_all(&magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tags.len() as u32).to_le_bytes())?;
    for t in tags {
        w.write_all(&t.to_le_bytes())?;
    }
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
    }
    for t in tensors {
        for v in t.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensors(r: &mut impl Read, magic: [u8; 4]) -> Result<(Vec<u32>, Vec<DenseMatrix>)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    if m != magic {
        return Err(Error::Checkpoint(format!(
            "magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let ntags = read_u32(r)? as usize;
    let tags = (0..ntags)
        .map(|_| read_u32(r))
        .collect::<Result<Vec<_>>>()?;
    let ntensors = read_u32(r)? as usize;
    let shapes = (0..ntensors)
        .map(|_| Ok((read_u32(r)? as usize, read_u32(r)? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let mut tensors = Vec::with_capacity(ntensors);
    for (rows, cols) in shapes {
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b)
                .map_err(|e| Error::Checkpoint(format!("truncated data: {e}")))?;
            data.push(f64::from_le_bytes(b));
        }
        tensors.push(DenseMatrix::from_vec(rows, cols, data)?);
    }
    Ok((tags, tensors))
}

fn head_tag(h: Head) -> u32 {
    match h {
        Head::Sigmoid => 0,
        Head::Softmax => 1,
    }
}

impl GcnModel {
    /// Tags: `head, layer_count, (kind, activation, weight_count)…`.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        let mut tags = vec![head_tag(self.head), self.layers.len() as u32];
        for l in &self.layers {
            tags.push(match l.kind {
                LayerKind::Gcn => 0,
                LayerKind::Hogcn => 1,
            });
            tags.push(match l.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            });
            tags.push(l.weights.len() as u32);
        }
        write_tensors(w, GCN_MAGIC, &tags, &self.params())
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        let (tags, tensors) = read_tensors(r, GCN_MAGIC)?;
        let bad = || Error::Checkpoint("malformed layer tags".into());
        let head = match tags.first() {
            Some(0) => Head::Sigmoid,
            Some(1) => Head::Softmax,
            _ => return Err(bad()),
        };
        let nlayers = *tags.get(1).ok_or_else(bad)? as usize;
        if tags.len() != 2 + 3 * nlayers {
            return Err(bad());
        }
        let mut tensors = tensors.into_iter();
        let mut layers = Vec::with_capacity(nlayers);
        for l in 0..nlayers {
            let t = &tags[2 + 3 * l..5 + 3 * l];
            let kind = match t[0] {
                0 => LayerKind::Gcn,
                1 => LayerKind::Hogcn,
                _ => return Err(bad()),
            };
            let activation = match t[1] {
                0 => Activation::Relu,
                1 => Activation::Identity,
                _ => return Err(bad()),
            };
            let weights: Vec<DenseMatrix> = tensors.by_ref().take(t[2] as usize).collect();
            if weights.len() != t[2] as usize {
                return Err(bad());
            }
            layers.push(GcnLayer {
                kind,
                weights,
                activation,
            });
        }
        if tensors.next().is_some() {
            return Err(bad());
        }
        Ok(GcnModel { layers, head })
    }
}
