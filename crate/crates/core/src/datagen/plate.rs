//! Steady-state heat conduction on a notched unit square.
//!
//! Mesh: jittered structured grid split into triangles (per-quad diagonal
//! chosen to maximize the minimum angle), with a square notch of relative
//! size `notch_size` removed from the bottom edge. Piecewise-linear FEM
//! Laplacian with a two-region conductivity field, Dirichlet temperatures on
//! the left/right edges, zero flux elsewhere, solved by dense Cholesky
//! factorization.

use super::{DataError, MeshSample, Result};
use crate::tensor::Tensor;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct PlateParams {
    pub t_left: f64,
    pub t_right: f64,
    pub conductivity_ratio: f64,
    pub notch_size: f64,
}

impl PlateParams {
    pub fn from_slice(p: &[f64]) -> PlateParams {
        PlateParams { t_left: p[0], t_right: p[1], conductivity_ratio: p[2], notch_size: p[3] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.t_left, self.t_right, self.conductivity_ratio, self.notch_size]
    }
}

/// Relative jitter of interior grid nodes, as a fraction of the cell size.
const JITTER: f64 = 0.2;

pub fn solve_plate_heat(params: &PlateParams, resolution: usize, seed: u64) -> Result<MeshSample> {
    if resolution < 8 {
        return Err(DataError::InvalidTask(format!("plate resolution must be >= 8, got {resolution}")));
    }
    // Physical validity; corpus-level range enforcement happens where the
    // parameter draws are made.
    if !params.t_left.is_finite() || !params.t_right.is_finite() {
        return Err(DataError::Numeric("non-finite boundary temperature".into()));
    }
    if params.conductivity_ratio <= 0.0 {
        return Err(DataError::ParamOutOfRange {
            name: "conductivity_ratio".into(),
            value: params.conductivity_ratio,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        });
    }
    if !(0.05..=0.6).contains(&params.notch_size) {
        return Err(DataError::ParamOutOfRange {
            name: "notch_size".into(),
            value: params.notch_size,
            min: 0.05,
            max: 0.6,
        });
    }

    let (coords, cells) = build_notched_mesh(params.notch_size, resolution, seed);
    let n = coords.len() / 2;

    let (a, b) = assemble_plate_system(&coords, &cells, params);
    let a_mat = DMatrix::from_fn(n, n, |i, j| a[i * n + j]);
    let b_vec = DVector::from_column_slice(&b);
    let chol = Cholesky::new(a_mat).ok_or_else(|| DataError::Solver {
        params: params.to_vec(),
        detail: "stiffness matrix is not positive definite".into(),
    })?;
    let u = chol.solve(&b_vec);

    let (flux_x, flux_y) = nodal_flux(&coords, &cells, params, u.as_slice());

    let mut fields = Vec::with_capacity(n * 3);
    for i in 0..n {
        fields.push(u[i]);
        fields.push(flux_x[i]);
        fields.push(flux_y[i]);
    }
    let sample = MeshSample {
        sample_id: String::new(),
        coords: Tensor::new(vec![n, 2], coords).map_err(|_| DataError::Numeric("non-finite coordinates".into()))?,
        cells,
        params: params.to_vec(),
        fields: Tensor::new(vec![n, 3], fields).map_err(|_| DataError::Numeric("non-finite solution fields".into()))?,
    };
    sample.validate()?;
    Ok(sample)
}

/// Relative infinity-norm residual of the solved linear system, reassembled
/// from the stored sample. Used as the post-hoc solver oracle.
pub fn plate_system_residual(sample: &MeshSample) -> Result<f64> {
    let params = PlateParams::from_slice(&sample.params);
    let n = sample.n_nodes();
    let coords = sample.coords.data().to_vec();
    let (a, b) = assemble_plate_system(&coords, &sample.cells, &params);
    let u: Vec<f64> = (0..n).map(|i| sample.fields.get(i, 0)).collect();
    let mut max_res: f64 = 0.0;
    let mut max_b: f64 = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[i * n + j] * u[j];
        }
        max_res = max_res.max((acc - b[i]).abs());
        max_b = max_b.max(b[i].abs());
    }
    if max_b == 0.0 {
        return Err(DataError::Numeric("zero right-hand side".into()));
    }
    Ok(max_res / max_b)
}

/// Builds the jittered, notched triangulation. Returns flat coords (N x 2)
/// and flat triangle connectivity.
fn build_notched_mesh(notch_size: f64, resolution: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let r = resolution;
    let h = 1.0 / r as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Grid nodes with jitter on interior nodes only: boundary nodes stay
    // exact so the Dirichlet edges remain x = 0 and x = 1.
    let mut grid = Vec::with_capacity((r + 1) * (r + 1) * 2);
    for j in 0..=r {
        for i in 0..=r {
            let (mut x, mut y) = (i as f64 * h, j as f64 * h);
            let (dx, dy) = (rng.gen_range(-JITTER..JITTER) * h, rng.gen_range(-JITTER..JITTER) * h);
            if i > 0 && i < r && j > 0 && j < r {
                x += dx;
                y += dy;
            }
            grid.push(x);
            grid.push(y);
        }
    }
    let node = |i: usize, j: usize| j * (r + 1) + i;
    let pt = |n: usize| (grid[2 * n], grid[2 * n + 1]);

    // Notch rectangle on the bottom edge, centered at x = 0.5.
    let (nx0, nx1) = (0.5 - notch_size / 2.0, 0.5 + notch_size / 2.0);
    let ny1 = notch_size;
    let in_notch = |cx: f64, cy: f64| cx > nx0 && cx < nx1 && cy < ny1;

    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(2 * r * r);
    for j in 0..r {
        for i in 0..r {
            let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            // Split along the diagonal giving the larger minimum angle.
            let split_ac = [[a, b, c], [a, c, d]];
            let split_bd = [[a, b, d], [b, c, d]];
            let min_angle = |tris: &[[usize; 3]; 2]| {
                tris.iter()
                    .map(|t| tri_min_angle(pt(t[0]), pt(t[1]), pt(t[2])))
                    .fold(f64::INFINITY, f64::min)
            };
            let chosen = if min_angle(&split_ac) >= min_angle(&split_bd) { split_ac } else { split_bd };
            for t in chosen {
                let cx = (pt(t[0]).0 + pt(t[1]).0 + pt(t[2]).0) / 3.0;
                let cy = (pt(t[0]).1 + pt(t[1]).1 + pt(t[2]).1) / 3.0;
                if !in_notch(cx, cy) {
                    tris.push(t);
                }
            }
        }
    }

    // Drop orphan nodes and reindex.
    let n_grid = (r + 1) * (r + 1);
    let mut used = vec![false; n_grid];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; n_grid];
    let mut coords = Vec::new();
    let mut next = 0usize;
    for (v, &u) in used.iter().enumerate() {
        if u {
            remap[v] = next;
            next += 1;
            coords.push(grid[2 * v]);
            coords.push(grid[2 * v + 1]);
        }
    }
    let cells: Vec<usize> = tris.iter().flat_map(|t| t.iter().map(|&v| remap[v])).collect();
    (coords, cells)
}

fn tri_min_angle(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)) -> f64 {
    let angle = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        let (ux, uy) = (b.0 - a.0, b.1 - a.1);
        let (vx, vy) = (c.0 - a.0, c.1 - a.1);
        let dot = ux * vx + uy * vy;
        let nu = (ux * ux + uy * uy).sqrt();
        let nv = (vx * vx + vy * vy).sqrt();
        (dot / (nu * nv)).clamp(-1.0, 1.0).acos()
    };
    angle(p1, p2, p3).min(angle(p2, p3, p1)).min(angle(p3, p1, p2))
}

/// Dense stiffness matrix and right-hand side after symmetric Dirichlet
/// elimination. Dirichlet rows become identity with the boundary temperature
/// on the right-hand side.
fn assemble_plate_system(coords: &[f64], cells: &[usize], params: &PlateParams) -> (Vec<f64>, Vec<f64>) {
    let n = coords.len() / 2;
    let mut a = vec![0.0; n * n];
    for tri in cells.chunks(3) {
        let (i, j, k) = (tri[0], tri[1], tri[2]);
        let (x1, y1) = (coords[2 * i], coords[2 * i + 1]);
        let (x2, y2) = (coords[2 * j], coords[2 * j + 1]);
        let (x3, y3) = (coords[2 * k], coords[2 * k + 1]);
        let area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
        let area = 0.5 * area2.abs();
        let bvec = [y2 - y3, y3 - y1, y1 - y2];
        let cvec = [x3 - x2, x1 - x3, x2 - x1];
        let cx = (x1 + x2 + x3) / 3.0;
        let kappa = if cx < 0.5 { 1.0 } else { params.conductivity_ratio };
        let scale = kappa / (4.0 * area);
        let nodes = [i, j, k];
        for p in 0..3 {
            for q in 0..3 {
                a[nodes[p] * n + nodes[q]] += scale * (bvec[p] * bvec[q] + cvec[p] * cvec[q]);
            }
        }
    }

    let mut b = vec![0.0; n];
    let dirichlet: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let x = coords[2 * i];
            if x == 0.0 {
                Some(params.t_left)
            } else if x == 1.0 {
                Some(params.t_right)
            } else {
                None
            }
        })
        .collect();

    for (d, temp) in dirichlet.iter().enumerate() {
        let Some(t) = temp else { continue };
        for i in 0..n {
            if dirichlet[i].is_none() {
                b[i] -= a[i * n + d] * t;
            }
            a[i * n + d] = 0.0;
            a[d * n + i] = 0.0;
        }
        a[d * n + d] = 1.0;
        b[d] = *t;
    }
    (a, b)
}

/// Area-weighted average of the (constant) element fluxes at each node.
fn nodal_flux(coords: &[f64], cells: &[usize], params: &PlateParams, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = coords.len() / 2;
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut w = vec![0.0; n];
    for tri in cells.chunks(3) {
        let (i, j, k) = (tri[0], tri[1], tri[2]);
        let (x1, y1) = (coords[2 * i], coords[2 * i + 1]);
        let (x2, y2) = (coords[2 * j], coords[2 * j + 1]);
        let (x3, y3) = (coords[2 * k], coords[2 * k + 1]);
        let area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
        let area = 0.5 * area2.abs();
        let bvec = [y2 - y3, y3 - y1, y1 - y2];
        let cvec = [x3 - x2, x1 - x3, x2 - x1];
        let cx = (x1 + x2 + x3) / 3.0;
        let kappa = if cx < 0.5 { 1.0 } else { params.conductivity_ratio };
        let uvals = [u[i], u[j], u[k]];
        let mut gx = 0.0;
        let mut gy = 0.0;
        for p in 0..3 {
            gx += uvals[p] * bvec[p];
            gy += uvals[p] * cvec[p];
        }
        gx /= area2;
        gy /= area2;
        for &node in &[i, j, k] {
            fx[node] += -kappa * gx * area;
            fy[node] += -kappa * gy * area;
            w[node] += area;
        }
    }
    for i in 0..n {
        fx[i] /= w[i];
        fy[i] /= w[i];
    }
    (fx, fy)
}
