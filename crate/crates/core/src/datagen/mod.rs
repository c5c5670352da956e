//! Synthetic parametric steady-state simulation corpora on unstructured
//! meshes, plus the partitioning of a corpus into shifted source/target
//! domains driven by each task's dominant parameter.

mod corpus;
mod io;
mod plate;
mod rod;
mod split;
mod task;

#[cfg(test)]
mod tests;

pub use corpus::{build_corpus, Corpus};
pub use io::{
    read_dataset, read_sample, write_dataset, write_sample, Dataset, Manifest, SampleEntry,
    FORMAT_VERSION, SAMPLE_MAGIC,
};
pub use plate::{plate_system_residual, solve_plate_heat, PlateParams};
pub use rod::{rod_tip_deflection_closed_form, solve_rod_bending, RodParams};
pub use split::{split_domains, DomainSplit};
pub use task::{Difficulty, ParamDescriptor, ShiftBoundaries, TaskSpec};

use crate::tensor::{Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid task spec: {0}")]
    InvalidTask(String),
    #[error("parameter {name}={value} outside [{min}, {max}]")]
    ParamOutOfRange { name: String, value: f64, min: f64, max: f64 },
    #[error("solver failed for params {params:?}: {detail}")]
    Solver { params: Vec<f64>, detail: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{domain} domain has only {count} samples (need at least 4)")]
    InsufficientData { domain: String, count: usize },
    #[error("format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One simulation instance: node coordinates, cell connectivity, the input
/// parameter vector and the per-node output fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSample {
    pub sample_id: String,
    /// N x d node coordinates, d in {1, 2}.
    pub coords: Tensor,
    /// Flat connectivity; arity is d + 1 (segments in 1D, triangles in 2D).
    pub cells: Vec<usize>,
    pub params: Vec<f64>,
    /// N x F per-node outputs.
    pub fields: Tensor,
}

impl MeshSample {
    pub fn n_nodes(&self) -> usize {
        self.coords.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.coords.shape()[1]
    }

    pub fn n_fields(&self) -> usize {
        self.fields.shape()[1]
    }

    pub fn cell_arity(&self) -> usize {
        self.dim() + 1
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.cell_arity()
    }

    /// Checks cell indices are in range and the mesh is connected.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.fields.shape()[0] != n {
            return Err(DataError::Numeric(format!(
                "sample {}: fields have {} rows for {} nodes",
                self.sample_id,
                self.fields.shape()[0],
                n
            )));
        }
        if let Some(&bad) = self.cells.iter().find(|&&i| i >= n) {
            return Err(DataError::Numeric(format!(
                "sample {}: cell index {bad} out of range 0..{n}",
                self.sample_id
            )));
        }
        if !is_connected(n, &self.cells, self.cell_arity()) {
            return Err(DataError::Numeric(format!("sample {}: mesh is disconnected", self.sample_id)));
        }
        Ok(())
    }
}

fn is_connected(n_nodes: usize, cells: &[usize], arity: usize) -> bool {
    if n_nodes == 0 {
        return false;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for cell in cells.chunks(arity) {
        for i in 0..arity {
            for j in (i + 1)..arity {
                adj[cell[i]].push(cell[j]);
                adj[cell[j]].push(cell[i]);
            }
        }
    }
    let mut seen = vec![false; n_nodes];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 0;
    while let Some(v) = stack.pop() {
        count += 1;
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    count == n_nodes
}

/// Deterministic per-index seed derivation (splitmix64 round).
pub(crate) fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
