use ndarray::Array2;

use super::similarity::cosine;
use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::scalar::Scalar;

/// Binary mask over the adjacency support plus the diagonal: an edge is kept
/// iff the cosine similarity of its endpoint features is at least the
/// threshold. Non-edges are always 0, the diagonal always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PruningMask<T> {
    threshold: T,
    n: usize,
    kept: Vec<(usize, usize)>,
    pruned: Vec<(usize, usize)>,
}

impl<T: Scalar> PruningMask<T> {
    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Kept edges, canonical `(u, v)` with `u < v`.
    pub fn kept_edges(&self) -> &[(usize, usize)] {
        &self.kept
    }

    pub fn pruned_edges(&self) -> &[(usize, usize)] {
        &self.pruned
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        if u == v {
            return u < self.n;
        }
        self.kept.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut p = Array2::eye(self.n);
        for &(u, v) in &self.kept {
            p[[u, v]] = T::one();
            p[[v, u]] = T::one();
        }
        p
    }
}

pub fn build_pruning_mask<T: Scalar>(g: &GraphView<T>, threshold: T) -> Result<PruningMask<T>> {
    if !(threshold >= -T::one() && threshold <= T::one()) {
        return Err(Error::Validation(format!(
            "pruning threshold {threshold} outside [-1, 1]"
        )));
    }
    let (kept, pruned) = g.adjacency.edges().iter().partition(|&&(u, v)| {
        cosine(g.features.row(u), g.features.row(v)) >= threshold
    });
    Ok(PruningMask {
        threshold,
        n: g.n_nodes(),
        kept,
        pruned,
    })
}
