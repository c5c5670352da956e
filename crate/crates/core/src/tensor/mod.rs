//! Dense numerical core with reverse-mode differentiation.
//!
//! Everything that needs a gradient in this crate — surrogate forwards,
//! divergence losses, the domain discriminator — is expressed as a chain of
//! the primitive operations recorded on a [`Tape`]. The op set is closed and
//! small so every backward rule is individually testable against central
//! finite differences.

mod check;
mod tape;

pub use check::grad_check;
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

/// Element precision for tensor values.
///
/// `Double` is the default everywhere; `Single` emulates 32-bit arithmetic by
/// rounding the result of every operation through `f32`, which is what the
/// looser 32-bit gradient tolerances are calibrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("segment {segment} is empty (every segment must contain at least one row)")]
    DegenerateSegment { segment: usize },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("invalid tensor construction: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Dense rank-1 or rank-2 tensor, row-major.
///
/// Invariants: `data.len()` equals the product of the shape extents and every
/// element is finite. Both are enforced at construction and re-checked after
/// every tape operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    precision: Precision,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_precision(shape, data, Precision::Double)
    }

    pub fn with_precision(shape: Vec<usize>, data: Vec<f64>, precision: Precision) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(TensorError::Invalid(format!(
                "rank must be 1 or 2, got shape {shape:?}"
            )));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::Invalid(format!("zero extent in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::Invalid(format!(
                "shape {shape:?} implies {numel} elements, got {}",
                data.len()
            )));
        }
        let mut t = Tensor { shape, data, precision };
        t.quantize();
        if !t.all_finite() {
            return Err(TensorError::NonFinite { op: "construct" });
        }
        Ok(t)
    }

    /// Vector of length `n`.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(vec![1], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        Self::new(shape, vec![0.0; numel])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(TensorError::Invalid("no rows".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::Invalid("ragged rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of rows when rank-2, otherwise 1.
    pub fn rows(&self) -> usize {
        if self.rank() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Number of columns when rank-2, otherwise the vector length.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(self.rank() == 2);
        self.data[row * self.shape[1] + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Self::with_precision(shape, self.data.clone(), self.precision)
    }

    /// Euclidean norm of the flattened data.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn quantize(&mut self) {
        if self.precision == Precision::Single {
            for v in &mut self.data {
                *v = *v as f32 as f64;
            }
        }
    }
}

/// Scales `tensors` in place so their joint Euclidean norm does not exceed
/// `max_norm`. Returns the norm before clipping.
pub fn clip_by_global_norm(tensors: &mut [Tensor], max_norm: f64) -> Result<f64> {
    let sq: f64 = tensors
        .iter()
        .map(|t| t.data.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if !norm.is_finite() {
        return Err(TensorError::NonFinite { op: "clip_by_global_norm" });
    }
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in tensors {
            for v in &mut t.data {
                *v *= scale;
            }
            t.quantize();
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests;
