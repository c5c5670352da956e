//! Corpus generation: stratified parameter sampling plus per-sample solver
//! invocation, deterministic in (task, n_samples, seed).

use super::{derive_seed, DataError, MeshSample, PlateParams, Result, RodParams, TaskSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Corpus {
    pub task: TaskSpec,
    pub seed: u64,
    pub samples: Vec<MeshSample>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dominant_values(&self) -> Vec<f64> {
        let idx = self.task.dominant_index();
        self.samples.iter().map(|s| s.params[idx]).collect()
    }
}

/// Draws parameters by per-parameter stratified uniform sampling (equal-width
/// strata, independently shuffled per parameter) and runs the task solver on
/// each draw. Sample generation is parallel across indices; results are
/// assembled in index order so the corpus is order-deterministic.
pub fn build_corpus(task: &TaskSpec, n_samples: usize, seed: u64) -> Result<Corpus> {
    task.validate()?;
    if n_samples < 1 {
        return Err(DataError::InvalidTask("n_samples must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(task.params.len());
    for p in &task.params {
        let width = (p.max - p.min) / n_samples as f64;
        let mut col: Vec<f64> = (0..n_samples)
            .map(|s| p.min + width * (s as f64 + rng.gen_range(0.0..1.0)))
            .collect();
        col.shuffle(&mut rng);
        columns.push(col);
    }

    let samples: Vec<Result<MeshSample>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let params: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            let sample_seed = derive_seed(seed, i as u64);
            let mut sample = match task.name.as_str() {
                "plate-heat" => solve_checked(
                    || super::solve_plate_heat(&PlateParams::from_slice(&params), task.resolution, sample_seed),
                    &params,
                )?,
                "rod-bending" => solve_checked(
                    || super::solve_rod_bending(&RodParams::from_slice(&params), task.resolution),
                    &params,
                )?,
                other => return Err(DataError::InvalidTask(format!("unknown task '{other}'"))),
            };
            sample.sample_id = format!("{}-{:06}", task.name, i);
            Ok(sample)
        })
        .collect();

    let samples: Vec<MeshSample> = samples.into_iter().collect::<Result<_>>()?;
    Ok(Corpus { task: task.clone(), seed, samples })
}

fn solve_checked(solve: impl FnOnce() -> Result<MeshSample>, params: &[f64]) -> Result<MeshSample> {
    solve().map_err(|e| match e {
        DataError::Solver { detail, .. } => DataError::Solver { params: params.to_vec(), detail },
        DataError::Numeric(detail) => DataError::Solver { params: params.to_vec(), detail },
        other => other,
    })
}
