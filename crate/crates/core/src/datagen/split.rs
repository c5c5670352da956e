//! Source/target partitioning driven by the dominant parameter.

use super::{Corpus, DataError, Difficulty, Result, ShiftBoundaries, TaskSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The partition of a corpus for one difficulty: source gets a 50/25/25
/// train/val/test split, target gets 50/50 train/test, remainders rounding
/// toward the training partitions. Target labels stay on disk but are
/// flagged unavailable for training; the harness enforces that flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSplit {
    pub difficulty: Difficulty,
    pub boundary: f64,
    /// Source half-open range [a, b) over the dominant parameter.
    pub source_range: (f64, f64),
    /// Target closed range [b, c].
    pub target_range: (f64, f64),
    pub src_train: Vec<usize>,
    pub src_val: Vec<usize>,
    pub src_test: Vec<usize>,
    pub tgt_train: Vec<usize>,
    pub tgt_test: Vec<usize>,
}

impl DomainSplit {
    pub fn source_indices(&self) -> Vec<usize> {
        let mut v = [self.src_train.as_slice(), self.src_val.as_slice(), self.src_test.as_slice()].concat();
        v.sort_unstable();
        v
    }

    pub fn target_indices(&self) -> Vec<usize> {
        let mut v = [self.tgt_train.as_slice(), self.tgt_test.as_slice()].concat();
        v.sort_unstable();
        v
    }

    pub fn partitions(&self) -> [(&'static str, &[usize]); 5] {
        [
            ("src_train", &self.src_train),
            ("src_val", &self.src_val),
            ("src_test", &self.src_test),
            ("tgt_train", &self.tgt_train),
            ("tgt_test", &self.tgt_test),
        ]
    }

    /// Checks that the partitions are disjoint and jointly cover `n` indices.
    pub fn check_partition(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let mut total = 0usize;
        for (name, part) in self.partitions() {
            for &i in part {
                if i >= n {
                    return Err(DataError::Numeric(format!("{name} index {i} out of range 0..{n}")));
                }
                if seen[i] {
                    return Err(DataError::Numeric(format!("index {i} appears in two partitions")));
                }
                seen[i] = true;
                total += 1;
            }
        }
        if total != n {
            return Err(DataError::Numeric(format!("partitions cover {total} of {n} samples")));
        }
        Ok(())
    }
}

pub fn split_domains(
    corpus: &Corpus,
    task: &TaskSpec,
    difficulty: Difficulty,
    boundaries: &ShiftBoundaries,
    seed: u64,
) -> Result<DomainSplit> {
    let dom = task.dominant_param();
    if !(dom.min < boundaries.hard
        && boundaries.hard < boundaries.medium
        && boundaries.medium < boundaries.easy
        && boundaries.easy < dom.max)
    {
        return Err(DataError::InvalidTask(format!(
            "boundaries must satisfy {} < hard < medium < easy < {}, got {:?}",
            dom.min, dom.max, boundaries
        )));
    }
    let boundary = match difficulty {
        Difficulty::Easy => boundaries.easy,
        Difficulty::Medium => boundaries.medium,
        Difficulty::Hard => boundaries.hard,
    };

    let values = corpus.dominant_values();
    let mut source: Vec<usize> = Vec::new();
    let mut target: Vec<usize> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v < boundary {
            source.push(i);
        } else {
            target.push(i);
        }
    }
    if source.len() < 4 {
        return Err(DataError::InsufficientData { domain: "source".into(), count: source.len() });
    }
    if target.len() < 4 {
        return Err(DataError::InsufficientData { domain: "target".into(), count: target.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    source.shuffle(&mut rng);
    target.shuffle(&mut rng);

    let n_s = source.len();
    let (n_val, n_te) = (n_s / 4, n_s / 4);
    let n_tr = n_s - n_val - n_te;
    let mut src_train: Vec<usize> = source[..n_tr].to_vec();
    let mut src_val: Vec<usize> = source[n_tr..n_tr + n_val].to_vec();
    let mut src_test: Vec<usize> = source[n_tr + n_val..].to_vec();

    let n_t = target.len();
    let t_te = n_t / 2;
    let t_tr = n_t - t_te;
    let mut tgt_train: Vec<usize> = target[..t_tr].to_vec();
    let mut tgt_test: Vec<usize> = target[t_tr..].to_vec();

    for part in [&mut src_train, &mut src_val, &mut src_test, &mut tgt_train, &mut tgt_test] {
        part.sort_unstable();
    }

    let split = DomainSplit {
        difficulty,
        boundary,
        source_range: (dom.min, boundary),
        target_range: (boundary, dom.max),
        src_train,
        src_val,
        src_test,
        tgt_train,
        tgt_test,
    };
    split.check_partition(corpus.len())?;
    Ok(split)
}
