//! Directed edge index derived from mesh cells: both directions per cell
//! edge plus one self-loop per node, so every node has in-degree >= 1.

use crate::tensor::{Result, Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyIndex {
    pub n_nodes: usize,
    /// Edge sources; message values are gathered from these rows.
    pub src: Vec<usize>,
    /// Edge destinations; messages aggregate into these segments.
    pub dst: Vec<usize>,
}

impl AdjacencyIndex {
    pub fn from_cells(n_nodes: usize, cells: &[usize], arity: usize) -> AdjacencyIndex {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(cells.len() * 2 + n_nodes);
        for cell in cells.chunks(arity) {
            for i in 0..arity {
                for j in (i + 1)..arity {
                    edges.push((cell[i], cell[j]));
                    edges.push((cell[j], cell[i]));
                }
            }
        }
        for v in 0..n_nodes {
            edges.push((v, v));
        }
        edges.sort_unstable_by_key(|&(s, d)| (d, s));
        edges.dedup();
        let (src, dst) = edges.into_iter().map(|(s, d)| (s, d)).unzip();
        AdjacencyIndex { n_nodes, src, dst }
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    /// Mean of incoming neighbor features per node: gather by edge source,
    /// segment-mean by edge destination.
    pub fn mean_neighbors(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let msgs = tape.gather_rows(h, &self.src)?;
        tape.segment_mean(msgs, &self.dst, self.n_nodes)
    }

    /// Relabels the graph under a node permutation (new = perm[old]).
    pub fn permuted(&self, perm: &[usize]) -> AdjacencyIndex {
        let mut edges: Vec<(usize, usize)> =
            self.src.iter().zip(&self.dst).map(|(&s, &d)| (perm[s], perm[d])).collect();
        edges.sort_unstable_by_key(|&(s, d)| (d, s));
        let (src, dst) = edges.into_iter().unzip();
        AdjacencyIndex { n_nodes: self.n_nodes, src, dst }
    }
}
