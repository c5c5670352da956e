//! Sinusoidal input encoding.
//!
//! Each input scalar u (pre-scaled to [0, 1]) expands into K (sin, cos)
//! pairs at frequencies w_k = base^(k / (K - 1)), k = 0..K-1.

use crate::tensor::{Result, Tensor};

pub fn sinusoidal_features(values: &[f64], rows: usize, cols: usize, k: usize, base: f64) -> Result<Tensor> {
    assert!(k >= 2, "need at least two frequencies");
    let freqs: Vec<f64> = (0..k).map(|j| base.powf(j as f64 / (k - 1) as f64)).collect();
    let mut data = Vec::with_capacity(rows * cols * 2 * k);
    for r in 0..rows {
        for c in 0..cols {
            let u = values[r * cols + c];
            for &w in &freqs {
                data.push((w * u).sin());
                data.push((w * u).cos());
            }
        }
    }
    Tensor::new(vec![rows, cols * 2 * k], data)
}
