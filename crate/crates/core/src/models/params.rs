//! Named parameter tensors with a stable flat layout.

use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamLayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// Ordered collection of named parameter tensors. Registration order defines
/// the flat blob layout, so construction must be deterministic.
#[derive(Debug, Clone)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet { names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor);
    }

    /// Linear layer: weight `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero bias.
    pub fn push_linear(&mut self, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize) {
        let bound = (1.0 / fan_in as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
        self.push(&format!("{name}.w"), Tensor::new(vec![fan_in, fan_out], w).unwrap());
        self.push(&format!("{name}.b"), Tensor::zeros(vec![fan_out]).unwrap());
    }

    /// FiLM site: affine maps of the latent to per-feature scale and shift.
    /// The scale bias starts at one so modulation begins near identity.
    pub fn push_film(&mut self, rng: &mut ChaCha8Rng, name: &str, latent: usize, features: usize) {
        let bound = (1.0 / latent as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..bound)).collect() };
        self.push(&format!("{name}.wg"), Tensor::new(vec![latent, features], draw(latent * features)).unwrap());
        self.push(&format!("{name}.bg"), Tensor::new(vec![features], vec![1.0; features]).unwrap());
        self.push(&format!("{name}.wb"), Tensor::new(vec![latent, features], draw(latent * features)).unwrap());
        self.push(&format!("{name}.bb"), Tensor::zeros(vec![features]).unwrap());
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[self.index_of(name)]
    }

    pub fn set(&mut self, name: &str, tensor: Tensor) {
        let i = self.index_of(name);
        assert_eq!(self.tensors[i].shape(), tensor.shape());
        self.tensors[i] = tensor;
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.iter_mut()
    }

    pub fn tensor_slice(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn replace_all(&mut self, tensors: Vec<Tensor>) {
        assert_eq!(tensors.len(), self.tensors.len());
        for (old, new) in self.tensors.iter().zip(&tensors) {
            assert_eq!(old.shape(), new.shape());
        }
        self.tensors = tensors;
    }

    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    /// Flat little-endian-friendly parameter vector in registration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len());
        for t in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn layout(&self) -> Vec<ParamLayoutEntry> {
        let mut out = Vec::with_capacity(self.names.len());
        let mut offset = 0;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            out.push(ParamLayoutEntry { name: name.clone(), shape: t.shape().to_vec(), offset });
            offset += t.numel();
        }
        out
    }

    /// Rebuilds the tensors from a flat vector matching [`ParamSet::flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) -> crate::tensor::Result<()> {
        assert_eq!(flat.len(), self.total_len(), "flat parameter size mismatch");
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.numel();
            *t = Tensor::new(t.shape().to_vec(), flat[offset..offset + n].to_vec())?;
            offset += n;
        }
        Ok(())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}
