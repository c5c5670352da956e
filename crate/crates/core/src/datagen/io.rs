//! Dataset directory format.
//!
//! `manifest.json` carries the task spec, parameter descriptors, the sample
//! table (id -> file -> params) and the split definitions. Each sample lives
//! in its own binary file:
//!
//! ```text
//! bytes 0..8    magic "DBMESHV1"
//! bytes 8..16   little-endian u64 format version (currently 1)
//! 4 x u64 LE    counts N, d, C, F
//! N*d  f64 LE   coords, row-major
//! C*(d+1) u64 LE cells
//! P    f64 LE   params (P comes from the manifest's parameter descriptors)
//! N*F  f64 LE   fields, row-major
//! ```
//!
//! Writing is bit-deterministic, so write -> read -> write round-trips to
//! identical bytes.

use super::{Corpus, DataError, Difficulty, DomainSplit, MeshSample, Result, TaskSpec};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const SAMPLE_MAGIC: [u8; 8] = *b"DBMESHV1";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub file: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u64,
    pub task: TaskSpec,
    pub seed: u64,
    pub n_samples: usize,
    pub samples: Vec<SampleEntry>,
    pub splits: BTreeMap<String, DomainSplit>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<MeshSample>,
}

impl Dataset {
    pub fn split(&self, difficulty: Difficulty) -> Result<&DomainSplit> {
        self.manifest
            .splits
            .get(difficulty.as_str())
            .ok_or_else(|| DataError::InvalidTask(format!("dataset has no '{}' split", difficulty.as_str())))
    }
}

pub fn write_sample(path: &Path, sample: &MeshSample) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + sample.coords.numel() * 8 + sample.cells.len() * 8 + sample.fields.numel() * 8);
    buf.extend_from_slice(&SAMPLE_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for count in [
        sample.n_nodes() as u64,
        sample.dim() as u64,
        sample.n_cells() as u64,
        sample.n_fields() as u64,
    ] {
        buf.extend_from_slice(&count.to_le_bytes());
    }
    for &v in sample.coords.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &c in &sample.cells {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for &p in &sample.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for &v in sample.fields.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(DataError::Format {
                offset: self.buf.len() as u64,
                detail: format!("truncated while reading {what}: need {n} bytes at offset {}", self.pos),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let s = self.take(8, what)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let s = self.take(n * 8, what)?;
        Ok(s.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn u64_vec(&mut self, n: usize, what: &str) -> Result<Vec<usize>> {
        let s = self.take(n * 8, what)?;
        Ok(s.chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect())
    }
}

/// Reads one sample file. `n_params` comes from the manifest's parameter
/// descriptors; the binary itself only carries the N, d, C, F counts.
pub fn read_sample(path: &Path, sample_id: &str, n_params: usize) -> Result<MeshSample> {
    let bytes = std::fs::read(path)?;
    let mut r = ByteReader { buf: &bytes, pos: 0 };

    let magic = r.take(8, "magic")?;
    if magic != SAMPLE_MAGIC {
        return Err(DataError::Format { offset: 0, detail: format!("bad magic {magic:02x?}") });
    }
    let version = r.u64("version")?;
    if version != FORMAT_VERSION {
        return Err(DataError::Format { offset: 8, detail: format!("unsupported version {version}") });
    }
    let n = r.u64("node count")? as usize;
    let d = r.u64("dimension")? as usize;
    let c = r.u64("cell count")? as usize;
    let f = r.u64("field count")? as usize;
    if d == 0 || d > 2 {
        return Err(DataError::Format { offset: 24, detail: format!("dimension must be 1 or 2, got {d}") });
    }
    let coords = r.f64_vec(n * d, "coords")?;
    let cells = r.u64_vec(c * (d + 1), "cells")?;
    let params = r.f64_vec(n_params, "params")?;
    let fields = r.f64_vec(n * f, "fields")?;
    if r.pos != bytes.len() {
        return Err(DataError::Format {
            offset: r.pos as u64,
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }

    let sample = MeshSample {
        sample_id: sample_id.to_string(),
        coords: Tensor::new(vec![n, d], coords)
            .map_err(|e| DataError::Format { offset: 48, detail: format!("coords: {e}") })?,
        cells,
        params,
        fields: Tensor::new(vec![n, f], fields)
            .map_err(|e| DataError::Format { offset: 48, detail: format!("fields: {e}") })?,
    };
    sample.validate()?;
    Ok(sample)
}

pub fn write_dataset(dir: &Path, corpus: &Corpus, splits: &BTreeMap<String, DomainSplit>) -> Result<Manifest> {
    std::fs::create_dir_all(dir.join("samples"))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for sample in &corpus.samples {
        let file = format!("samples/{}.bin", sample.sample_id);
        write_sample(&dir.join(&file), sample)?;
        entries.push(SampleEntry { id: sample.sample_id.clone(), file, params: sample.params.clone() });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        task: corpus.task.clone(),
        seed: corpus.seed,
        n_samples: corpus.len(),
        samples: entries,
        splits: splits.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)?;
    manifest.task.validate()?;
    let n_params = manifest.task.params.len();
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let sample = read_sample(&dir.join(&entry.file), &entry.id, n_params)?;
        samples.push(sample);
    }
    Ok(Dataset { manifest, samples })
}
