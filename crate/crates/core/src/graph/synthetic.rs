use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{largest_connected_component, Adjacency, AttributedGraph, GraphView};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SPLIT_STREAM: u64 = 0x5eed_5b11_7500_0000;

/// Planted-partition graph with Gaussian class-conditional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Number of classes (equal-size contiguous blocks).
    pub c: usize,
    /// Feature dimension; must be at least `c`.
    pub d: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Class `y` has mean `class_sep * e_y`; noise is unit variance.
    pub class_sep: f64,
    pub seed: u64,
    /// Fraction of each class placed in the labeled split (at least one node).
    pub labeled_fraction: f64,
    /// Number of target nodes drawn from the unlabeled remainder.
    pub n_targets: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 400,
            c: 4,
            d: 8,
            p_in: 0.05,
            p_out: 0.005,
            class_sep: 2.0,
            seed: 0,
            labeled_fraction: 0.2,
            n_targets: 5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n == 0 || self.c == 0 {
            return bad(format!("n={} and c={} must be positive", self.n, self.c));
        }
        if self.d < self.c {
            return bad(format!("d={} must be at least c={}", self.d, self.c));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return bad(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return bad(format!("class_sep={} must be finite and >= 0", self.class_sep));
        }
        if !(0.0..=1.0).contains(&self.labeled_fraction) {
            return bad(format!("labeled_fraction={} outside [0, 1]", self.labeled_fraction));
        }
        Ok(())
    }

    pub fn block_of(&self, u: usize) -> usize {
        u * self.c / self.n
    }

    /// The sampled graph before component extraction, with empty splits.
    pub fn sample_raw<T: Scalar>(&self) -> Result<AttributedGraph<T>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.n;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if self.block_of(u) == self.block_of(v) {
                    self.p_in
                } else {
                    self.p_out
                };
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let labels: Vec<usize> = (0..n).map(|u| self.block_of(u)).collect();
        let features = Array2::from_shape_fn((n, self.d), |(u, k)| {
            let noise: f64 = rng.sample(StandardNormal);
            let mean = if k == labels[u] { self.class_sep } else { 0.0 };
            T::of(mean + noise)
        });
        let (adjacency, _) = Adjacency::from_edges(n, edges)?;
        AttributedGraph::new(GraphView::new(adjacency, features)?, labels, self.c, vec![], vec![])
    }
}

/// Samples the planted-partition graph, keeps its largest component and
/// draws a stratified labeled split plus a target split, all under `seed`.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<AttributedGraph<T>> {
    let g = largest_connected_component(&spec.sample_raw::<T>()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ SPLIT_STREAM);
    let mut order: Vec<usize> = (0..g.n_nodes()).collect();
    order.shuffle(&mut rng);

    let mut class_size = vec![0usize; spec.c];
    for &y in g.labels() {
        class_size[y] += 1;
    }
    let quota: Vec<usize> = class_size
        .iter()
        .map(|&s| ((s as f64 * spec.labeled_fraction).round() as usize).clamp(s.min(1), s))
        .collect();
    let mut taken = vec![0usize; spec.c];
    let mut labeled = Vec::new();
    let mut rest = Vec::new();
    for &u in &order {
        let y = g.labels()[u];
        if taken[y] < quota[y] {
            taken[y] += 1;
            labeled.push(u);
        } else {
            rest.push(u);
        }
    }
    rest.truncate(spec.n_targets);
    AttributedGraph::new(g.view().clone(), g.labels().to_vec(), spec.c, labeled, rest)
}
