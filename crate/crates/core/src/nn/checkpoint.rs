//! `RBWE1` checkpoint container.
//!
//! Layout: the magic line `RBWE1\n`, a single-line JSON manifest terminated by
//! `\n`, then every parameter as little-endian `f32` values concatenated in
//! manifest order.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::layer::LayerSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"RBWE1\n";

/// Largest manifest accepted, to keep malformed input from exhausting memory.
const MAX_MANIFEST_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormEntry {
    /// Index of the normalization layer within its network.
    pub layer: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub normalization: Vec<NormEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamEntry {
    fn len(&self) -> Option<usize> {
        self.shape.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub networks: Vec<NetworkEntry>,
    pub params: Vec<ParamEntry>,
    pub hyperparameters: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    /// One array per manifest parameter, in the same order.
    pub values: Vec<Vec<f32>>,
}

impl Checkpoint {
    pub fn new(manifest: Manifest, values: Vec<Vec<f32>>) -> Result<Self> {
        let ckpt = Self { manifest, values };
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<()> {
        if self.manifest.params.len() != self.values.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameter entries but {} value arrays",
                self.manifest.params.len(),
                self.values.len()
            )));
        }
        for (entry, values) in self.manifest.params.iter().zip(&self.values) {
            if entry.len() != Some(values.len()) {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?} but {} values",
                    entry.name,
                    entry.shape,
                    values.len()
                )));
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<(&ParamEntry, &[f32])> {
        self.manifest
            .params
            .iter()
            .position(|p| p.name == name)
            .map(|i| (&self.manifest.params[i], self.values[i].as_slice()))
    }

    pub fn network(&self, name: &str) -> Option<&NetworkEntry> {
        self.manifest.networks.iter().find(|n| n.name == name)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let manifest = serde_json::to_vec(&self.manifest)?;
        let scalars: usize = self.values.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(MAGIC.len() + manifest.len() + 1 + 4 * scalars);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&manifest);
        out.push(b'\n');
        for v in self.values.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Checkpoint("missing RBWE1 magic".into()))?;
        let end = rest
            .iter()
            .take(MAX_MANIFEST_BYTES)
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Checkpoint("unterminated manifest".into()))?;
        let manifest: Manifest = serde_json::from_slice(&rest[..end])
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        let mut payload = &rest[end + 1..];
        let mut total = 0usize;
        for p in &manifest.params {
            let n = p
                .len()
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Checkpoint(format!("parameter {} is too large", p.name)))?;
            total = total
                .checked_add(n)
                .ok_or_else(|| Error::Checkpoint("payload size overflows".into()))?;
        }
        if total != payload.len() {
            return Err(Error::Checkpoint(format!(
                "manifest describes {total} payload bytes, found {}",
                payload.len()
            )));
        }
        let mut values = Vec::with_capacity(manifest.params.len());
        for p in &manifest.params {
            let n = p.len().unwrap_or(0);
            let (head, tail) = payload.split_at(4 * n);
            values.push(
                head.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            );
            payload = tail;
        }
        Self::new(manifest, values)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
