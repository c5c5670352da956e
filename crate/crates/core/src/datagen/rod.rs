//! Cantilever beam with an end point load, solved per node by finite
//! differences on a uniform 1D mesh.
//!
//! The bending moment of the statically determinate cantilever follows from
//! equilibrium, `M(x) = F (L - x)`; the deflection is then integrated from
//! `w'' = M / (E I)` with a three-term marching scheme seeded by the clamp
//! conditions `w(0) = w'(0) = 0`. Bending stress per node is `M t / (2 I)`
//! for a square cross-section of side `t` (`I = t^4 / 12`).

use super::{DataError, MeshSample, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct RodParams {
    pub length: f64,
    pub thickness: f64,
    pub load: f64,
    pub modulus: f64,
}

impl RodParams {
    pub fn from_slice(p: &[f64]) -> RodParams {
        RodParams { length: p[0], thickness: p[1], load: p[2], modulus: p[3] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.length, self.thickness, self.load, self.modulus]
    }

    pub fn second_moment(&self) -> f64 {
        self.thickness.powi(4) / 12.0
    }
}

pub fn solve_rod_bending(params: &RodParams, nodes: usize) -> Result<MeshSample> {
    if nodes < 8 {
        return Err(DataError::InvalidTask(format!("rod mesh needs >= 8 nodes, got {nodes}")));
    }
    for (name, v, lo) in [
        ("length", params.length, f64::MIN_POSITIVE),
        ("thickness", params.thickness, f64::MIN_POSITIVE),
        ("load", params.load, 0.0),
        ("modulus", params.modulus, f64::MIN_POSITIVE),
    ] {
        if !v.is_finite() || v < lo {
            return Err(DataError::ParamOutOfRange { name: name.into(), value: v, min: lo, max: f64::INFINITY });
        }
    }

    let n = nodes;
    let h = params.length / (n - 1) as f64;
    let ei = params.modulus * params.second_moment();
    let moment = |x: f64| params.load * (params.length - x);

    let xs: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut w = vec![0.0; n];
    if n >= 2 {
        // Taylor start consistent with w(0) = w'(0) = 0:
        // w'' (0) = M(0)/EI, w'''(0) = M'(0)/EI = -F/EI.
        w[1] = moment(xs[0]) / ei * h * h / 2.0 - params.load / ei * h * h * h / 6.0;
    }
    for i in 1..n - 1 {
        w[i + 1] = 2.0 * w[i] - w[i - 1] + h * h * moment(xs[i]) / ei;
    }

    let half_t = params.thickness / 2.0;
    let inertia = params.second_moment();
    let stress: Vec<f64> = xs.iter().map(|&x| moment(x) * half_t / inertia).collect();

    let mut cells = Vec::with_capacity(2 * (n - 1));
    for i in 0..n - 1 {
        cells.push(i);
        cells.push(i + 1);
    }

    let mut fields = Vec::with_capacity(n * 2);
    for i in 0..n {
        fields.push(w[i]);
        fields.push(stress[i]);
    }
    let sample = MeshSample {
        sample_id: String::new(),
        coords: Tensor::new(vec![n, 1], xs).map_err(|_| DataError::Numeric("non-finite coordinates".into()))?,
        cells,
        params: params.to_vec(),
        fields: Tensor::new(vec![n, 2], fields).map_err(|_| DataError::Numeric("non-finite beam fields".into()))?,
    };
    sample.validate()?;
    Ok(sample)
}

/// Closed-form tip deflection `F L^3 / (3 E I)`, the independent oracle for
/// the finite-difference route.
pub fn rod_tip_deflection_closed_form(params: &RodParams) -> f64 {
    params.load * params.length.powi(3) / (3.0 * params.modulus * params.second_moment())
}
