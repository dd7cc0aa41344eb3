//! Linear surrogates (SGC, PrSGC) and a two-layer GCN victim, with analytic
//! gradients for training and for attacking their inputs.

mod loss;
mod mask;
mod similarity;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize::normalize_masked, AttributedGraph, GraphView};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

pub(crate) use loss::{argmax_rows, cross_entropy};
pub use mask::{build_pruning_mask, PruningMask};
pub(crate) use similarity::{cosine, cosine_grad};
pub use similarity::cosine_sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `Â² X W`
    Sgc,
    /// `(Â ⊙ P)² X W` with a cosine-similarity pruning mask `P`.
    #[serde(rename = "prsgc")]
    PrSgc,
    /// `Â ReLU(Â X W₁) W₂`
    Gcn2,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Sgc => "sgc",
            Variant::PrSgc => "prsgc",
            Variant::Gcn2 => "gcn2",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgc" => Ok(Variant::Sgc),
            "prsgc" => Ok(Variant::PrSgc),
            "gcn2" | "gcn" => Ok(Variant::Gcn2),
            other => Err(Error::Validation(format!("unknown model variant `{other}`"))),
        }
    }
}

/// A node classifier with pre-softmax (linearized) logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel<T> {
    variant: Variant,
    weights: Vec<Array2<T>>,
    epsilon: Option<T>,
    trained_on: Option<String>,
}

/// Cached intermediates of one forward pass.
struct Forward<T> {
    prop: CsrMatrix<T>,
    /// GCN2 only: `Â X W₁` before the ReLU.
    pre: Option<Array2<T>>,
    logits: Array2<T>,
}

impl<T: Scalar> SurrogateModel<T> {
    pub fn sgc(n_features: usize, n_classes: usize) -> Self {
        SurrogateModel {
            variant: Variant::Sgc,
            weights: vec![Array2::zeros((n_features, n_classes))],
            epsilon: None,
            trained_on: None,
        }
    }

    pub fn prsgc(n_features: usize, n_classes: usize, epsilon: T) -> Result<Self> {
        if !(epsilon >= -T::one() && epsilon <= T::one()) {
            return Err(Error::Validation(format!(
                "pruning threshold {epsilon} outside [-1, 1]"
            )));
        }
        Ok(SurrogateModel {
            variant: Variant::PrSgc,
            epsilon: Some(epsilon),
            ..Self::sgc(n_features, n_classes)
        })
    }

    /// Two-layer GCN with Glorot-uniform weights drawn under `seed`.
    pub fn gcn2(n_features: usize, hidden: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || {
                T::of(rng.random_range(-bound..=bound))
            })
        };
        let w1 = glorot(n_features, hidden);
        let w2 = glorot(hidden, n_classes);
        SurrogateModel {
            variant: Variant::Gcn2,
            weights: vec![w1, w2],
            epsilon: None,
            trained_on: None,
        }
    }

    /// Builds an untrained model of the given variant. `epsilon` is required
    /// for PrSGC and `hidden` is used by GCN2 only.
    pub fn init(
        variant: Variant,
        n_features: usize,
        n_classes: usize,
        hidden: usize,
        epsilon: T,
        seed: u64,
    ) -> Result<Self> {
        match variant {
            Variant::Sgc => Ok(Self::sgc(n_features, n_classes)),
            Variant::PrSgc => Self::prsgc(n_features, n_classes, epsilon),
            Variant::Gcn2 => Ok(Self::gcn2(n_features, hidden, n_classes, seed)),
        }
    }

    /// Replaces the weights; shapes must chain `D -> ... -> C`.
    pub fn with_weights(mut self, weights: Vec<Array2<T>>) -> Result<Self> {
        let expected = self.weights.iter().map(|w| w.dim()).collect::<Vec<_>>();
        let got = weights.iter().map(|w| w.dim()).collect::<Vec<_>>();
        if expected != got {
            return Err(Error::Dimension(format!(
                "weight shapes {got:?}, expected {expected:?}"
            )));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn epsilon(&self) -> Option<T> {
        self.epsilon
    }

    pub fn trained_on(&self) -> Option<&str> {
        self.trained_on.as_deref()
    }

    pub fn n_features(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.last().unwrap().ncols()
    }

    /// Same weights, different variant (GCN2 weights cannot be reused by the
    /// linear variants and vice versa).
    pub fn as_variant(&self, variant: Variant, epsilon: Option<T>) -> Result<Self> {
        let linear = |v: Variant| v != Variant::Gcn2;
        if linear(variant) != linear(self.variant) {
            return Err(Error::Validation(format!(
                "cannot reinterpret {} weights as {variant}",
                self.variant
            )));
        }
        let mut m = self.clone();
        m.variant = variant;
        m.epsilon = match variant {
            Variant::PrSgc => Some(epsilon.or(self.epsilon).ok_or_else(|| {
                Error::Validation("PrSGC needs a pruning threshold".into())
            })?),
            _ => None,
        };
        Ok(m)
    }

    fn check(&self, g: &GraphView<T>) -> Result<()> {
        if g.n_features() != self.n_features() {
            return Err(Error::Dimension(format!(
                "model expects {} features, graph has {}",
                self.n_features(),
                g.n_features()
            )));
        }
        Ok(())
    }

    /// The message-passing operator: `Â`, or `Â ⊙ P` for PrSGC.
    pub fn propagation(&self, g: &GraphView<T>) -> CsrMatrix<T> {
        match (self.variant, self.epsilon) {
            (Variant::PrSgc, Some(eps)) => normalize_masked(&g.adjacency, |u, v| {
                cosine(g.features.row(u), g.features.row(v)) >= eps
            })
            .matrix,
            _ => normalize_masked(&g.adjacency, |_, _| true).matrix,
        }
    }

    fn forward(&self, g: &GraphView<T>) -> Result<Forward<T>> {
        self.check(g)?;
        let prop = self.propagation(g);
        let x = g.features.view();
        Ok(match self.variant {
            Variant::Sgc | Variant::PrSgc => {
                let xw = x.dot(&self.weights[0]);
                let once = prop.matmul_dense(xw.view())?;
                let logits = prop.matmul_dense(once.view())?;
                Forward {
                    prop,
                    pre: None,
                    logits,
                }
            }
            Variant::Gcn2 => {
                let pre = prop.matmul_dense(x.dot(&self.weights[0]).view())?;
                let hidden = pre.mapv(|v| v.max(T::zero()));
                let logits = prop.matmul_dense(hidden.dot(&self.weights[1]).view())?;
                Forward {
                    prop,
                    pre: Some(pre),
                    logits,
                }
            }
        })
    }

    /// Pre-softmax logits for every node, `N × C`.
    pub fn forward_logits(&self, g: &GraphView<T>) -> Result<Array2<T>> {
        Ok(self.forward(g)?.logits)
    }

    /// Gradient of `sum(upstream ⊙ logits)` with respect to the node
    /// features, holding the pruning mask fixed.
    pub fn input_gradient(&self, g: &GraphView<T>, upstream: ArrayView2<T>) -> Result<Array2<T>> {
        let fw = self.forward(g)?;
        self.input_gradient_from(&fw, upstream)
    }

    /// Evaluates `loss_fn` on the logits and back-propagates the gradient it
    /// returns to the node features in a single forward pass.
    pub(crate) fn value_and_input_gradient(
        &self,
        g: &GraphView<T>,
        loss_fn: impl FnOnce(ArrayView2<T>) -> (T, Array2<T>),
    ) -> Result<(T, Array2<T>)> {
        let fw = self.forward(g)?;
        let (value, upstream) = loss_fn(fw.logits.view());
        let grad = self.input_gradient_from(&fw, upstream.view())?;
        Ok((value, grad))
    }

    fn input_gradient_from(&self, fw: &Forward<T>, upstream: ArrayView2<T>) -> Result<Array2<T>> {
        let s = &fw.prop;
        match self.variant {
            Variant::Sgc | Variant::PrSgc => {
                let once = s.transpose_matmul_dense(upstream)?;
                let twice = s.transpose_matmul_dense(once.view())?;
                Ok(twice.dot(&self.weights[0].t()))
            }
            Variant::Gcn2 => {
                let d_pre = self.gcn2_pre_grad(fw, upstream)?;
                Ok(s.transpose_matmul_dense(d_pre.view())?.dot(&self.weights[0].t()))
            }
        }
    }

    fn gcn2_pre_grad(&self, fw: &Forward<T>, upstream: ArrayView2<T>) -> Result<Array2<T>> {
        let pre = fw.pre.as_ref().expect("gcn2 forward caches pre-activations");
        let d_hidden = fw
            .prop
            .transpose_matmul_dense(upstream)?
            .dot(&self.weights[1].t());
        Ok(ndarray::Zip::from(&d_hidden)
            .and(pre)
            .map_collect(|&d, &p| if p > T::zero() { d } else { T::zero() }))
    }

    /// Gradient of `sum(upstream ⊙ logits)` with respect to each weight matrix.
    pub fn weight_gradient(
        &self,
        g: &GraphView<T>,
        upstream: ArrayView2<T>,
    ) -> Result<Vec<Array2<T>>> {
        let fw = self.forward(g)?;
        let s = &fw.prop;
        let x = g.features.view();
        match self.variant {
            Variant::Sgc | Variant::PrSgc => {
                let back = s.transpose_matmul_dense(s.transpose_matmul_dense(upstream)?.view())?;
                Ok(vec![x.t().dot(&back)])
            }
            Variant::Gcn2 => {
                let pre = fw.pre.as_ref().unwrap();
                let hidden = pre.mapv(|v| v.max(T::zero()));
                let prop_hidden = s.matmul_dense(hidden.view())?;
                let d_w2 = prop_hidden.t().dot(&upstream);
                let d_pre = self.gcn2_pre_grad(&fw, upstream)?;
                let prop_x = s.matmul_dense(x)?;
                Ok(vec![prop_x.t().dot(&d_pre), d_w2])
            }
        }
    }

    /// Argmax class per node; ties go to the smaller class id.
    pub fn predict(&self, g: &GraphView<T>, nodes: &[usize]) -> Result<Vec<usize>> {
        check_nodes(g, nodes)?;
        Ok(argmax_rows(self.forward_logits(g)?.view(), nodes))
    }

    /// Summed cross-entropy over `targets` using `labels[u]` as ground truth.
    pub fn loss_on_targets(&self, g: &GraphView<T>, labels: &[usize], targets: &[usize]) -> Result<T> {
        if targets.is_empty() {
            return Err(Error::Empty("target set".into()));
        }
        check_nodes(g, targets)?;
        let logits = self.forward_logits(g)?;
        Ok(cross_entropy(logits.view(), targets, labels).0)
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            variant: self.variant,
            epsilon: self.epsilon,
            shapes: self.weights.iter().map(|w| [w.nrows(), w.ncols()]).collect(),
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            graph_fingerprint: self.trained_on.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint<T>) -> Result<Self> {
        let expected_layers = if ck.variant == Variant::Gcn2 { 2 } else { 1 };
        if ck.shapes.len() != expected_layers || ck.weights.len() != expected_layers {
            return Err(Error::Validation(format!(
                "{} checkpoint with {} weight matrices",
                ck.variant,
                ck.weights.len()
            )));
        }
        let weights = ck
            .shapes
            .iter()
            .zip(ck.weights)
            .map(|(&[r, c], data)| {
                Array2::from_shape_vec((r, c), data)
                    .map_err(|e| Error::Dimension(format!("weight matrix {r}x{c}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if weights.windows(2).any(|w| w[0].ncols() != w[1].nrows()) {
            return Err(Error::Dimension("weight matrices do not chain".into()));
        }
        if ck.variant == Variant::PrSgc && ck.epsilon.is_none() {
            return Err(Error::Validation("PrSGC checkpoint without epsilon".into()));
        }
        Ok(SurrogateModel {
            variant: ck.variant,
            weights,
            epsilon: if ck.variant == Variant::PrSgc { ck.epsilon } else { None },
            trained_on: ck.graph_fingerprint,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.to_checkpoint())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(serde_json::from_str(&text)?)
    }
}

fn check_nodes<T: Scalar>(g: &GraphView<T>, nodes: &[usize]) -> Result<()> {
    match nodes.iter().find(|&&u| u >= g.n_nodes()) {
        Some(u) => Err(Error::Validation(format!(
            "node {u} outside [0, {})",
            g.n_nodes()
        ))),
        None => Ok(()),
    }
}

/// On-disk model: row-major weights at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub variant: Variant,
    pub epsilon: Option<T>,
    pub shapes: Vec<[usize; 2]>,
    pub weights: Vec<Vec<T>>,
    pub graph_fingerprint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.2,
            epochs: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub model: SurrogateModel<T>,
    /// Mean labeled-set loss before each epoch, then after the last one.
    pub losses: Vec<T>,
}

impl<T: Scalar> Trained<T> {
    pub fn final_loss(&self) -> T {
        *self.losses.last().unwrap()
    }
}

/// Full-batch gradient descent on the mean cross-entropy over the labeled
/// set. The pruning mask of PrSGC is taken from the clean training graph.
pub fn train<T: Scalar>(
    model: &SurrogateModel<T>,
    g: &AttributedGraph<T>,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    let labeled = g.labeled_set();
    let mut present = vec![false; g.n_classes()];
    for &u in labeled {
        present[g.labels()[u]] = true;
    }
    if let Some(c) = present.iter().position(|&p| !p) {
        return Err(Error::Precondition(format!(
            "class {c} has no labeled node"
        )));
    }
    if model.n_classes() != g.n_classes() {
        return Err(Error::Dimension(format!(
            "model has {} classes, graph has {}",
            model.n_classes(),
            g.n_classes()
        )));
    }
    model.check(g.view())?;

    let scale = T::one() / T::of(labeled.len() as f64);
    let lr = T::of(cfg.lr);
    let mut model = model.clone();
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let record = |epoch: usize, loss: T, losses: &mut Vec<T>| -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::Divergence {
                stage: "epoch",
                step: epoch,
                value: loss.as_f64(),
            });
        }
        losses.push(loss);
        Ok(())
    };

    match model.variant {
        Variant::Sgc | Variant::PrSgc => {
            // The propagated features never change; only W does.
            let prop = model.propagation(g.view());
            let smoothed = prop.matmul_dense(prop.matmul_dense(g.features().view())?.view())?;
            for epoch in 0..=cfg.epochs {
                let logits = smoothed.dot(&model.weights[0]);
                let (loss, grad) = cross_entropy(logits.view(), labeled, g.labels());
                record(epoch, loss * scale, &mut losses)?;
                if epoch == cfg.epochs {
                    break;
                }
                let dw = smoothed.t().dot(&grad) * scale;
                model.weights[0].scaled_add(-lr, &dw);
            }
        }
        Variant::Gcn2 => {
            for epoch in 0..=cfg.epochs {
                let logits = model.forward_logits(g.view())?;
                let (loss, grad) = cross_entropy(logits.view(), labeled, g.labels());
                record(epoch, loss * scale, &mut losses)?;
                if epoch == cfg.epochs {
                    break;
                }
                let grads = model.weight_gradient(g.view(), grad.view())?;
                for (w, dw) in model.weights.iter_mut().zip(grads) {
                    w.scaled_add(-lr * scale, &dw);
                }
            }
        }
    }
    model.trained_on = Some(g.fingerprint());
    Ok(Trained { model, losses })
}

/// Mean labeled-set cross-entropy and its gradient with respect to every
/// weight matrix.
pub fn training_objective<T: Scalar>(
    model: &SurrogateModel<T>,
    g: &AttributedGraph<T>,
) -> Result<(T, Vec<Array2<T>>)> {
    let labeled = g.labeled_set();
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set".into()));
    }
    let scale = T::one() / T::of(labeled.len() as f64);
    let logits = model.forward_logits(g.view())?;
    let (loss, grad) = cross_entropy(logits.view(), labeled, g.labels());
    let grads = model.weight_gradient(g.view(), (grad * scale).view())?;
    Ok((loss * scale, grads))
}
