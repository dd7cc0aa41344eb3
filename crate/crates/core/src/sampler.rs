//! Layered K-hop sampling around a target set and the inter-layer
//! connectivity matrices consumed by the feature synthesizer.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Layers `V⁰ ⊆ V¹ ⊆ … ⊆ Vᴷ`, each in ascending node order, with
/// `V⁰` the target set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledNeighborhood {
    layers: Vec<Vec<usize>>,
    /// `links[k-1][i]` lists positions in layer `k` adjacent to the node at
    /// position `i` of layer `k-1`.
    links: Vec<Vec<Vec<usize>>>,
    fanout: usize,
    seed: u64,
}

/// Samples `V^k = V^{k-1} ∪ S(V^{k-1})`, where `S` draws up to `fanout`
/// neighbors of every node uniformly without replacement.
pub fn sample_neighborhood(
    adj: &Adjacency,
    targets: &[usize],
    depth: usize,
    fanout: usize,
    seed: u64,
) -> Result<SampledNeighborhood> {
    if targets.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    if depth == 0 || fanout == 0 {
        return Err(Error::Validation(format!(
            "depth {depth} and fanout {fanout} must both be at least 1"
        )));
    }
    let n = adj.n_nodes();
    if let Some(&t) = targets.iter().find(|&&t| t >= n) {
        return Err(Error::Validation(format!("target {t} outside [0, {n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = targets.to_vec();
    first.sort_unstable();
    first.dedup();
    let mut layers = vec![first];
    let mut member = vec![false; n];
    for &t in &layers[0] {
        member[t] = true;
    }
    for _ in 0..depth {
        let prev = layers.last().unwrap();
        let mut next = prev.clone();
        for &u in prev {
            for &v in adj.neighbors(u).choose_multiple(&mut rng, fanout) {
                if !member[v] {
                    member[v] = true;
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        layers.push(next);
    }

    let links = (1..=depth)
        .map(|k| {
            let outer = &layers[k];
            layers[k - 1]
                .iter()
                .map(|&u| {
                    adj.neighbors(u)
                        .iter()
                        .filter_map(|v| outer.binary_search(v).ok())
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(SampledNeighborhood {
        layers,
        links,
        fanout,
        seed,
    })
}

impl SampledNeighborhood {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, k: usize) -> &[usize] {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Position of `node` within layer `k`.
    pub fn position(&self, k: usize, node: usize) -> Option<usize> {
        self.layers[k].binary_search(&node).ok()
    }

    /// 0/1 matrix `M^k` of shape `s^{k-1} × s^k`, for `1 ≤ k ≤ K`.
    pub fn connectivity<T: Scalar>(&self, k: usize) -> CsrMatrix<T> {
        let rows = &self.links[k - 1];
        CsrMatrix::from_triplets(
            rows.len(),
            self.layers[k].len(),
            rows.iter()
                .enumerate()
                .flat_map(|(i, cols)| cols.iter().map(move |&j| (i, j, T::one()))),
        )
        .expect("positions within layers")
    }

    /// Row-normalized `M̃^k`; rows without neighbors stay zero.
    pub fn normalized<T: Scalar>(&self, k: usize) -> CsrMatrix<T> {
        self.connectivity::<T>(k).row_normalized()
    }

    pub fn nnz(&self, k: usize) -> usize {
        self.links[k - 1].iter().map(Vec::len).sum()
    }

    /// Rows of `M^k` with no neighbor in layer `k`.
    pub fn zero_rows(&self, k: usize) -> usize {
        self.links[k - 1].iter().filter(|r| r.is_empty()).count()
    }

    pub fn debug_dump(&self) -> NeighborhoodDump {
        NeighborhoodDump {
            layers: self.layers.clone(),
            nnz: (1..=self.depth()).map(|k| self.nnz(k)).collect(),
            zero_rows: (1..=self.depth()).map(|k| self.zero_rows(k)).collect(),
            fanout: self.fanout,
            seed: self.seed,
        }
    }
}

/// JSON-friendly summary of a sample.
#[derive(Debug, Clone, Serialize)]
pub struct NeighborhoodDump {
    pub layers: Vec<Vec<usize>>,
    pub nnz: Vec<usize>,
    pub zero_rows: Vec<usize>,
    pub fanout: usize,
    pub seed: u64,
}

/// Planning bound `|V_t| · m^K`, saturating at `u64::MAX`.
pub fn sampling_cost_estimate(targets: u64, fanout: u64, depth: u32) -> u64 {
    let est = fanout
        .checked_pow(depth)
        .and_then(|p| p.checked_mul(targets));
    est.unwrap_or_else(|| {
        log::warn!("sampling cost |V_t|={targets} m={fanout} K={depth} overflows; saturating");
        u64::MAX
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Adjacency {
        Adjacency::from_edges(3, [(0, 1), (1, 2)]).unwrap().0
    }

    fn star(leaves: usize) -> Adjacency {
        Adjacency::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).unwrap().0
    }

    #[test]
    fn path_one_hop() {
        let nb = sample_neighborhood(&path3(), &[0], 1, 5, 0).unwrap();
        assert_eq!(nb.layers(), &[vec![0], vec![0, 1]]);
        assert_eq!(nb.connectivity::<f64>(1).to_dense(), ndarray::array![[0.0, 1.0]]);
    }

    #[test]
    fn path_two_hops() {
        let nb = sample_neighborhood(&path3(), &[0], 2, 5, 0).unwrap();
        assert_eq!(nb.layer(2), &[0, 1, 2]);
        assert_eq!(nb.sizes(), vec![1, 2, 3]);
    }

    #[test]
    fn star_fanout_caps_sample() {
        let g = star(10);
        let a = sample_neighborhood(&g, &[0], 1, 3, 1).unwrap();
        let b = sample_neighborhood(&g, &[0], 1, 3, 2).unwrap();
        assert_eq!(a.layer(1).len(), 4);
        assert_eq!(b.layer(1).len(), 4);
        assert_ne!(a.layer(1), b.layer(1));
        assert_eq!(a, sample_neighborhood(&g, &[0], 1, 3, 1).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let g = path3();
        assert!(sample_neighborhood(&g, &[], 1, 1, 0).is_err());
        assert!(sample_neighborhood(&g, &[3], 1, 1, 0).is_err());
        assert!(sample_neighborhood(&g, &[0], 0, 1, 0).is_err());
    }

    #[test]
    fn cost_estimates() {
        assert_eq!(sampling_cost_estimate(10, 5, 2), 250);
        assert_eq!(sampling_cost_estimate(1, 1, 5), 1);
        assert_eq!(sampling_cost_estimate(100, 10, 3), 100_000);
        assert_eq!(sampling_cost_estimate(10, 1 << 40, 2), u64::MAX);
    }
}
