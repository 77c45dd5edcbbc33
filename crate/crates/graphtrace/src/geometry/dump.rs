//! The hidden-state dump format.
//!
//! A dump is a directory produced by an external inference stack:
//!
//! - `manifest.txt` — `key = value` lines: `layer_ids` (comma-separated),
//!   `hidden_dim`, `token_count`, and `walk_ref` (provenance hash of the
//!   walk the activations were collected over).
//! - `layer_<id>.f32` — one file per layer: `token_count x hidden_dim`
//!   little-endian 32-bit floats, row-major by token position.
//! - `alignment.i32` — `token_count` little-endian signed 32-bit integers:
//!   the state index each token denotes, or -1 for non-state tokens.
//!
//! Loading validates sizes exactly; truncated or misaligned files are
//! rejected rather than clamped.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::topology::State;

use super::GeometryError;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ALIGNMENT_FILE: &str = "alignment.i32";

pub fn layer_file(layer_id: u32) -> String {
    format!("layer_{layer_id}.f32")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpManifest {
    pub layer_ids: Vec<u32>,
    pub hidden_dim: usize,
    pub token_count: usize,
    pub walk_ref: String,
}

impl DumpManifest {
    fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut layer_ids = None;
        let mut hidden_dim = None;
        let mut token_count = None;
        let mut walk_ref = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| GeometryError::CorruptDump(format!("manifest line '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "layer_ids" => {
                    let ids: Result<Vec<u32>, _> =
                        value.split(',').map(|v| v.trim().parse()).collect();
                    layer_ids = Some(ids.map_err(|_| {
                        GeometryError::CorruptDump(format!("bad layer_ids '{value}'"))
                    })?);
                }
                "hidden_dim" => {
                    hidden_dim = Some(value.parse().map_err(|_| {
                        GeometryError::CorruptDump(format!("bad hidden_dim '{value}'"))
                    })?);
                }
                "token_count" => {
                    token_count = Some(value.parse().map_err(|_| {
                        GeometryError::CorruptDump(format!("bad token_count '{value}'"))
                    })?);
                }
                "walk_ref" => walk_ref = Some(value.to_string()),
                other => {
                    return Err(GeometryError::CorruptDump(format!(
                        "unknown manifest key '{other}'"
                    )))
                }
            }
        }
        let missing = |k: &str| GeometryError::CorruptDump(format!("manifest missing {k}"));
        Ok(DumpManifest {
            layer_ids: layer_ids.ok_or_else(|| missing("layer_ids"))?,
            hidden_dim: hidden_dim.ok_or_else(|| missing("hidden_dim"))?,
            token_count: token_count.ok_or_else(|| missing("token_count"))?,
            walk_ref: walk_ref.ok_or_else(|| missing("walk_ref"))?,
        })
    }

    fn render(&self) -> String {
        let ids: Vec<String> = self.layer_ids.iter().map(|i| i.to_string()).collect();
        format!(
            "layer_ids = {}\nhidden_dim = {}\ntoken_count = {}\nwalk_ref = {}\n",
            ids.join(","),
            self.hidden_dim,
            self.token_count,
            self.walk_ref
        )
    }
}

/// Per-token, per-layer hidden vectors aligned to walk positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub manifest: DumpManifest,
    layers: BTreeMap<u32, Vec<f32>>,
    alignment: Vec<i32>,
}

impl EmbeddingDump {
    /// Assemble a dump in memory, validating shape consistency.
    pub fn from_parts(
        walk_ref: impl Into<String>,
        hidden_dim: usize,
        layers: BTreeMap<u32, Vec<f32>>,
        alignment: Vec<i32>,
    ) -> Result<Self, GeometryError> {
        let token_count = alignment.len();
        for (&id, data) in &layers {
            if data.len() != token_count * hidden_dim {
                return Err(GeometryError::CorruptDump(format!(
                    "layer {id} holds {} floats, expected {}",
                    data.len(),
                    token_count * hidden_dim
                )));
            }
        }
        if alignment.iter().any(|&a| a < -1) {
            return Err(GeometryError::CorruptDump(
                "alignment entries below -1".to_string(),
            ));
        }
        let manifest = DumpManifest {
            layer_ids: layers.keys().copied().collect(),
            hidden_dim,
            token_count,
            walk_ref: walk_ref.into(),
        };
        Ok(EmbeddingDump {
            manifest,
            layers,
            alignment,
        })
    }

    /// Load and validate a dump directory.
    pub fn load(dir: &Path) -> Result<Self, GeometryError> {
        let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest = DumpManifest::parse(&manifest_text)?;

        let mut alignment_bytes = Vec::new();
        fs::File::open(dir.join(ALIGNMENT_FILE))?.read_to_end(&mut alignment_bytes)?;
        if alignment_bytes.len() != manifest.token_count * 4 {
            return Err(GeometryError::CorruptDump(format!(
                "alignment holds {} bytes, expected {}",
                alignment_bytes.len(),
                manifest.token_count * 4
            )));
        }
        let alignment: Vec<i32> = alignment_bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if alignment.iter().any(|&a| a < -1) {
            return Err(GeometryError::CorruptDump(
                "alignment entries below -1".to_string(),
            ));
        }

        let mut layers = BTreeMap::new();
        let expected = manifest.token_count * manifest.hidden_dim * 4;
        for &id in &manifest.layer_ids {
            let mut bytes = Vec::new();
            fs::File::open(dir.join(layer_file(id)))?.read_to_end(&mut bytes)?;
            if bytes.len() != expected {
                return Err(GeometryError::CorruptDump(format!(
                    "layer {id} holds {} bytes, expected {expected}",
                    bytes.len()
                )));
            }
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            layers.insert(id, data);
        }
        Ok(EmbeddingDump {
            manifest,
            layers,
            alignment,
        })
    }

    /// Write the dump as a directory in the documented format.
    pub fn write(&self, dir: &Path) -> Result<(), GeometryError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), self.manifest.render())?;
        let mut alignment_bytes = Vec::with_capacity(self.alignment.len() * 4);
        for &a in &self.alignment {
            alignment_bytes.extend_from_slice(&a.to_le_bytes());
        }
        fs::write(dir.join(ALIGNMENT_FILE), alignment_bytes)?;
        for (&id, data) in &self.layers {
            let mut file = fs::File::create(dir.join(layer_file(id)))?;
            let mut bytes = Vec::with_capacity(data.len() * 4);
            for &v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn layer(&self, layer_id: u32) -> Result<&[f32], GeometryError> {
        self.layers
            .get(&layer_id)
            .map(|v| v.as_slice())
            .ok_or(GeometryError::MissingLayer(layer_id))
    }

    /// The hidden vector of one token at one layer.
    pub fn token_vector(&self, layer_id: u32, position: usize) -> Result<&[f32], GeometryError> {
        let layer = self.layer(layer_id)?;
        let dim = self.manifest.hidden_dim;
        Ok(&layer[position * dim..(position + 1) * dim])
    }

    /// State index a token position denotes, if any.
    pub fn state_at(&self, position: usize) -> Option<State> {
        match self.alignment[position] {
            a if a >= 0 => Some(a as State),
            _ => None,
        }
    }

    pub fn alignment(&self) -> &[i32] {
        &self.alignment
    }

    pub fn token_count(&self) -> usize {
        self.manifest.token_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_dump() -> EmbeddingDump {
        let mut layers = BTreeMap::new();
        layers.insert(3u32, vec![0.5f32, -1.25, 2.0, 0.0, f32::MIN_POSITIVE, 7.5]);
        layers.insert(9u32, vec![1.0f32; 6]);
        EmbeddingDump::from_parts("walkhash", 2, layers, vec![0, -1, 1]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dump = small_dump();
        let dir = tempdir().unwrap();
        dump.write(dir.path()).unwrap();
        let loaded = EmbeddingDump::load(dir.path()).unwrap();
        assert_eq!(loaded.manifest, dump.manifest);
        assert_eq!(loaded.alignment(), dump.alignment());
        for id in [3u32, 9] {
            let a = dump.layer(id).unwrap();
            let b = loaded.layer(id).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn well_formed_dump_loads() {
        let dump = small_dump();
        assert_eq!(dump.token_count(), 3);
        assert_eq!(dump.alignment().len(), dump.token_count());
        assert_eq!(dump.state_at(0), Some(0));
        assert_eq!(dump.state_at(1), None);
        assert_eq!(dump.token_vector(3, 1).unwrap(), &[2.0, 0.0]);
    }

    #[test]
    fn truncated_layer_is_rejected() {
        let dump = small_dump();
        let dir = tempdir().unwrap();
        dump.write(dir.path()).unwrap();
        // drop one row's worth of bytes from a layer file
        let path = dir.path().join(layer_file(3));
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            EmbeddingDump::load(dir.path()),
            Err(GeometryError::CorruptDump(_))
        ));
    }

    #[test]
    fn misaligned_alignment_is_rejected() {
        let dump = small_dump();
        let dir = tempdir().unwrap();
        dump.write(dir.path()).unwrap();
        let path = dir.path().join(ALIGNMENT_FILE);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            EmbeddingDump::load(dir.path()),
            Err(GeometryError::CorruptDump(_))
        ));
    }

    #[test]
    fn missing_layer_file_is_an_error() {
        let dump = small_dump();
        let dir = tempdir().unwrap();
        dump.write(dir.path()).unwrap();
        fs::remove_file(dir.path().join(layer_file(9))).unwrap();
        assert!(EmbeddingDump::load(dir.path()).is_err());
    }

    #[test]
    fn unknown_layer_lookup_fails() {
        let dump = small_dump();
        assert!(matches!(
            dump.layer(42),
            Err(GeometryError::MissingLayer(42))
        ));
    }

    #[test]
    fn shape_mismatch_rejected_in_memory() {
        let mut layers = BTreeMap::new();
        layers.insert(0u32, vec![0.0f32; 5]);
        assert!(matches!(
            EmbeddingDump::from_parts("w", 2, layers, vec![0, 1, 2]),
            Err(GeometryError::CorruptDump(_))
        ));
    }
}
