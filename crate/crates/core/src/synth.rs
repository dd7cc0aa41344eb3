//! Reverse graph convolution: injected-node features are synthesized by
//! propagating sampled-neighborhood features from the outermost layer inward,
//! `X^{k-1} = ReLU(M̃^k X^k W^k)`, followed by a learnable per-dimension shift.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{clamp_features, AttributedGraph};
use crate::sampler::SampledNeighborhood;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ReverseConvGenerator<T> {
    /// `weights[k-1]` is `W^k`, each `D × D`.
    weights: Vec<Array2<T>>,
    bias: Array1<T>,
    seed: u64,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    sizes: Vec<usize>,
    /// `agg[k-1] = M̃^k X^k`
    agg: Vec<Array2<T>>,
    /// `pre[k-1] = M̃^k X^k W^k`
    pre: Vec<Array2<T>>,
    /// `M̃^k` per layer, reused by the backward pass.
    mixing: Vec<crate::sparse::CsrMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGradient<T> {
    pub weights: Vec<Array2<T>>,
    pub bias: Array1<T>,
}

impl<T: Scalar> GeneratorGradient<T> {
    pub fn norm(&self) -> T {
        let sq: T = self
            .weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.bias.iter())
            .map(|&v| v * v)
            .sum();
        sq.sqrt()
    }
}

/// `K` square `D × D` layers with entries uniform in `±sqrt(6 / 2D)`, zero
/// shift.
pub fn init_generator<T: Scalar>(depth: usize, dims: usize, seed: u64) -> Result<ReverseConvGenerator<T>> {
    if depth == 0 || dims == 0 {
        return Err(Error::Validation(format!(
            "generator needs depth >= 1 and dims >= 1, got {depth} and {dims}"
        )));
    }
    let bound = (6.0 / (2 * dims) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..depth)
        .map(|_| {
            Array2::from_shape_simple_fn((dims, dims), || T::of(rng.random_range(-bound..=bound)))
        })
        .collect();
    Ok(ReverseConvGenerator {
        weights,
        bias: Array1::zeros(dims),
        seed,
        cache: None,
    })
}

impl<T: Scalar> ReverseConvGenerator<T> {
    pub fn from_parts(weights: Vec<Array2<T>>, bias: Array1<T>, seed: u64) -> Result<Self> {
        let d = bias.len();
        if weights.is_empty() {
            return Err(Error::Validation("generator needs at least one layer".into()));
        }
        if let Some(w) = weights.iter().find(|w| w.dim() != (d, d)) {
            return Err(Error::Dimension(format!(
                "layer of shape {:?} in a {d}-dimensional generator",
                w.dim()
            )));
        }
        if weights.iter().flat_map(|w| w.iter()).chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite generator parameter".into()));
        }
        Ok(ReverseConvGenerator {
            weights,
            bias,
            seed,
            cache: None,
        })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<T> {
        &self.bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Unclamped `X⁰ + b`, rows aligned with layer 0. Caches the
    /// activations needed by [`Self::gradient`].
    pub fn synthesize_raw(&mut self, nb: &SampledNeighborhood, g: &AttributedGraph<T>) -> Result<Array2<T>> {
        let depth = self.depth();
        if nb.depth() != depth {
            return Err(Error::Dimension(format!(
                "generator has {depth} layers, neighborhood has depth {}",
                nb.depth()
            )));
        }
        if g.n_features() != self.dims() {
            return Err(Error::Dimension(format!(
                "generator is {}-dimensional, graph has {} features",
                self.dims(),
                g.n_features()
            )));
        }
        let mut x = g.features().select(Axis(0), nb.layer(depth));
        let mut agg = vec![Array2::zeros((0, 0)); depth];
        let mut pre = vec![Array2::zeros((0, 0)); depth];
        let mut mixing = Vec::with_capacity(depth);
        for k in 1..=depth {
            mixing.push(nb.normalized::<T>(k));
        }
        for k in (1..=depth).rev() {
            let a = mixing[k - 1].matmul_dense(x.view())?;
            let p = a.dot(&self.weights[k - 1]);
            x = p.mapv(|v| v.max(T::zero()));
            agg[k - 1] = a;
            pre[k - 1] = p;
        }
        self.cache = Some(Cache {
            sizes: nb.sizes(),
            agg,
            pre,
            mixing,
        });
        Ok(x + &self.bias)
    }

    /// [`Self::synthesize_raw`] clamped into the clean feature range.
    pub fn synthesize(&mut self, nb: &SampledNeighborhood, g: &AttributedGraph<T>) -> Result<Array2<T>> {
        let raw = self.synthesize_raw(nb, g)?;
        clamp_features(raw.view(), g.feature_range())
    }

    /// Gradients of `sum(upstream ⊙ raw_output)` with respect to every `W^k`
    /// and the shift, from the activations cached by the last forward pass.
    pub fn gradient(&self, nb: &SampledNeighborhood, upstream: &Array2<T>) -> Result<GeneratorGradient<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("gradient requested before any forward pass".into()))?;
        if cache.sizes != nb.sizes() {
            return Err(Error::State(
                "cached forward pass belongs to a different neighborhood".into(),
            ));
        }
        if upstream.dim() != (cache.sizes[0], self.dims()) {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?}, expected ({}, {})",
                upstream.dim(),
                cache.sizes[0],
                self.dims()
            )));
        }
        let bias = upstream.sum_axis(Axis(0));
        let mut weights = vec![Array2::zeros((0, 0)); self.depth()];
        let mut d_out = upstream.clone();
        for k in 1..=self.depth() {
            let d_pre = ndarray::Zip::from(&d_out)
                .and(&cache.pre[k - 1])
                .map_collect(|&d, &p| if p > T::zero() { d } else { T::zero() });
            weights[k - 1] = cache.agg[k - 1].t().dot(&d_pre);
            if k < self.depth() {
                let d_agg = d_pre.dot(&self.weights[k - 1].t());
                d_out = cache.mixing[k - 1].transpose_matmul_dense(d_agg.view())?;
            }
        }
        Ok(GeneratorGradient { weights, bias })
    }

    /// `θ ← θ - step · ∇θ`.
    pub fn descend(&mut self, grad: &GeneratorGradient<T>, step: T) {
        for (w, dw) in self.weights.iter_mut().zip(&grad.weights) {
            w.scaled_add(-step, dw);
        }
        self.bias.scaled_add(-step, &grad.bias);
        self.cache = None;
    }

    pub fn to_checkpoint(&self) -> GeneratorCheckpoint<T> {
        GeneratorCheckpoint {
            depth: self.depth(),
            dims: self.dims(),
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            bias: self.bias.to_vec(),
            seed: self.seed,
        }
    }

    pub fn from_checkpoint(ck: GeneratorCheckpoint<T>) -> Result<Self> {
        if ck.weights.len() != ck.depth {
            return Err(Error::Validation(format!(
                "checkpoint declares {} layers but stores {}",
                ck.depth,
                ck.weights.len()
            )));
        }
        let weights = ck
            .weights
            .into_iter()
            .map(|w| {
                Array2::from_shape_vec((ck.dims, ck.dims), w)
                    .map_err(|e| Error::Dimension(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(weights, Array1::from(ck.bias), ck.seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.to_checkpoint())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeneratorCheckpoint<T> {
    #[serde(rename = "K")]
    pub depth: usize,
    #[serde(rename = "D")]
    pub dims: usize,
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
    pub seed: u64,
}
