//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `SNNCKPT1`, a little-endian `u64` header length,
//! a JSON header, then the payload. The payload holds every group's weights
//! as little-endian `f32` (row-major, group order), then every bias vector as
//! `f32`, then every group's mask bit-packed row-major, least significant bit
//! first, each group padded to a whole byte. Offsets in the header are byte
//! offsets into the payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{LayerRef, MaskedNetwork, WeightGroup};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SNNCKPT1";
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Free-form provenance stored with a checkpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seeds: BTreeMap<String, u64>,
    pub init_method: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupDescriptor {
    source: LayerRef,
    target: LayerRef,
    rows: usize,
    cols: usize,
    weights_offset: usize,
    mask_offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BiasDescriptor {
    len: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    input_dim: usize,
    output_dim: usize,
    layer_units: Vec<usize>,
    layer_vertices: Vec<Vec<usize>>,
    groups: Vec<GroupDescriptor>,
    biases: Vec<BiasDescriptor>,
    payload_len: usize,
    #[serde(flatten)]
    meta: CheckpointMeta,
}

impl MaskedNetwork {
    pub fn to_checkpoint_bytes(&self, meta: &CheckpointMeta) -> Result<Vec<u8>> {
        let mut floats: Vec<u8> = Vec::new();
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let (rows, cols) = g.weights.dim();
            groups.push(GroupDescriptor {
                source: g.source,
                target: g.target,
                rows,
                cols,
                weights_offset: floats.len(),
                mask_offset: 0,
            });
            for &w in g.weights.iter() {
                floats.extend_from_slice(&(w as f32).to_le_bytes());
            }
        }
        let mut biases = Vec::with_capacity(self.biases.len());
        for b in &self.biases {
            biases.push(BiasDescriptor {
                len: b.len(),
                offset: floats.len(),
            });
            for &v in b.iter() {
                floats.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let mut payload = floats;
        for (desc, g) in groups.iter_mut().zip(&self.groups) {
            desc.mask_offset = payload.len();
            let bits: Vec<bool> = g.mask.iter().copied().collect();
            for chunk in bits.chunks(8) {
                let byte = chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i));
                payload.push(byte);
            }
        }
        let header = Header {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layer_units: self.layer_units.clone(),
            layer_vertices: self.layer_vertices.clone(),
            groups,
            biases,
            payload_len: payload.len(),
            meta: meta.clone(),
        };
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + header.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, CheckpointMeta)> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
        if header.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(bad("unsupported schema version"));
        }
        let payload = &bytes[header_end..];
        if payload.len() != header.payload_len {
            return Err(bad("payload length mismatch"));
        }
        let read_f32s = |offset: usize, n: usize| -> Result<Vec<f64>> {
            let end = offset + 4 * n;
            let slice = payload.get(offset..end).ok_or_else(|| bad("float array out of bounds"))?;
            Ok(slice
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect())
        };
        let mut groups = Vec::with_capacity(header.groups.len());
        for d in &header.groups {
            let n = d.rows * d.cols;
            let weights = Array2::from_shape_vec((d.rows, d.cols), read_f32s(d.weights_offset, n)?)
                .map_err(|_| bad("weight shape"))?;
            let packed = payload
                .get(d.mask_offset..d.mask_offset + n.div_ceil(8))
                .ok_or_else(|| bad("mask out of bounds"))?;
            let bits: Vec<bool> = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
            let mask = Array2::from_shape_vec((d.rows, d.cols), bits).map_err(|_| bad("mask shape"))?;
            groups.push(WeightGroup {
                source: d.source,
                target: d.target,
                weights,
                mask,
            });
        }
        if header.layer_units.len() != header.layer_vertices.len()
            || header.biases.len() != header.layer_units.len() + 1
        {
            return Err(bad("layer description inconsistent"));
        }
        let mut net = MaskedNetwork::assemble(header.input_dim, header.output_dim, header.layer_vertices, groups);
        for (i, d) in header.biases.iter().enumerate() {
            net.biases[i] = Array1::from(read_f32s(d.offset, d.len)?);
        }
        net.enforce_masks();
        Ok((net, header.meta))
    }

    pub fn save_checkpoint(&self, path: &Path, meta: &CheckpointMeta) -> Result<()> {
        fs::write(path, self.to_checkpoint_bytes(meta)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_ws, layer_dag, to_dag};
    use crate::network::{build_network, init_weights, InitMethod};

    #[test]
    fn round_trip_preserves_structure_and_f32_values() {
        let g = generate_ws(40, 2, 0.7, 3).unwrap();
        let mut net = build_network(&layer_dag(&to_dag(&g)).unwrap(), 20, 4).unwrap();
        init_weights(&mut net, InitMethod::GlorotUniform, 8);
        net.bias_mut(0)[0] = 0.25;
        let meta = CheckpointMeta {
            seeds: BTreeMap::from([("init".to_string(), 8)]),
            init_method: Some("G_U".into()),
        };
        let bytes = net.to_checkpoint_bytes(&meta).unwrap();
        let (back, meta_back) = MaskedNetwork::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(back.mask_pattern(), net.mask_pattern());
        assert_eq!(back.layer_vertices(), net.layer_vertices());
        for (a, b) in back.groups().iter().zip(net.groups()) {
            for (x, y) in a.weights().iter().zip(b.weights()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        assert_eq!(back.biases()[0][0], 0.25);
    }

    #[test]
    fn rejects_corrupt_input() {
        let net = MaskedNetwork::dense(3, &[2], 2).unwrap();
        let bytes = net.to_checkpoint_bytes(&CheckpointMeta::default()).unwrap();
        assert!(MaskedNetwork::from_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(MaskedNetwork::from_checkpoint_bytes(&wrong).is_err());
    }
}
