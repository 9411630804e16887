//! Fixed-length fingerprint embeddings and the `FPE1` embedding file.
//!
//! File layout: magic `FPE1`, dimension (u32 LE), record count (u32 LE), then
//! `count × dimension` little-endian f32 values. A sidecar
//! `<file>.manifest.tsv` lists `index<TAB>image_id`, one line per record.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FPE1";

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintEmbedding {
    vector: Vec<f32>,
    /// Euclidean norm before the final normalization.
    pub norm: f64,
}

impl FingerprintEmbedding {
    /// Normalizes `raw` to unit length.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical(format!("embedding norm is {norm}")));
        }
        Ok(Self {
            vector: raw.iter().map(|v| (v / norm) as f32).collect(),
            norm,
        })
    }

    /// Wraps an already normalized vector, e.g. one read back from disk.
    pub fn from_unit(vector: Vec<f32>) -> Result<Self> {
        let norm = vector.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-5 {
            return Err(Error::Contract(format!("stored embedding has norm {norm}, expected 1")));
        }
        Ok(Self { vector, norm: 1.0 })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Embeddings keyed by image id, in record order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingSet {
    pub ids: Vec<String>,
    pub embeddings: Vec<FingerprintEmbedding>,
}

impl EmbeddingSet {
    pub fn push(&mut self, id: impl Into<String>, e: FingerprintEmbedding) {
        self.ids.push(id.into());
        self.embeddings.push(e);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map(|e| e.dim()).unwrap_or(0)
    }

    pub fn lookup(&self) -> HashMap<&str, &FingerprintEmbedding> {
        self.ids.iter().map(String::as_str).zip(self.embeddings.iter()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&FingerprintEmbedding> {
        self.ids.iter().position(|i| i == id).map(|p| &self.embeddings[p])
    }

    /// The raw binary payload (header plus vectors).
    pub fn encode(&self) -> Result<Vec<u8>> {
        let dim = self.dim();
        if let Some(bad) = self.embeddings.iter().find(|e| e.dim() != dim) {
            return Err(Error::Contract(format!(
                "mixed embedding dimensions {dim} and {}",
                bad.dim()
            )));
        }
        let mut out = Vec::with_capacity(12 + 4 * dim * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for e in &self.embeddings {
            for v in e.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?)?;
        let mut manifest = BufWriter::new(fs::File::create(manifest_path(path))?);
        for (i, id) in self.ids.iter().enumerate() {
            writeln!(manifest, "{i}\t{id}")?;
        }
        manifest.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("{} is not an FPE1 file", path.display())));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload = &bytes[12..];
        if payload.len() != 4 * dim * count {
            return Err(Error::Format(format!(
                "{}: expected {} payload bytes, found {}",
                path.display(),
                4 * dim * count,
                payload.len()
            )));
        }
        let manifest = fs::read_to_string(manifest_path(path))?;
        let mut ids = vec![None; count];
        for (n, line) in manifest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (idx, id) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("manifest line {} is not `index<TAB>id`", n + 1))
            })?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("manifest line {}: bad index", n + 1)))?;
            if idx >= count {
                return Err(Error::Format(format!("manifest index {idx} beyond {count} records")));
            }
            ids[idx] = Some(id.to_string());
        }
        let ids: Vec<String> = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| id.ok_or_else(|| Error::Format(format!("manifest lacks record {i}"))))
            .collect::<Result<_>>()?;
        let embeddings = payload
            .chunks_exact(4 * dim.max(1))
            .take(count)
            .map(|chunk| {
                let v = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                FingerprintEmbedding::from_unit(v)
            })
            .collect::<Result<_>>()?;
        Ok(Self { ids, embeddings })
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.tsv");
    PathBuf::from(s)
}
