use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphView};
use crate::scalar::Scalar;

use super::AttackConfig;

/// Injected nodes, their features and where they attach. Injected node `i`
/// receives id `n_original + i` in the composed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InjectionPlan<T> {
    pub n_original: usize,
    /// `N_I × D`, row-major.
    pub injected_features: Vec<Vec<T>>,
    /// Original-graph neighbors of each injected node; the first entry is its
    /// anchor.
    pub attachments: Vec<Vec<usize>>,
    /// The target each injected node was assigned to.
    pub assigned_targets: Vec<usize>,
}

impl<T: Scalar> InjectionPlan<T> {
    pub fn new(
        n_original: usize,
        features: ArrayView2<T>,
        attachments: Vec<Vec<usize>>,
        assigned_targets: Vec<usize>,
    ) -> Self {
        InjectionPlan {
            n_original,
            injected_features: features.rows().into_iter().map(|r| r.to_vec()).collect(),
            attachments,
            assigned_targets,
        }
    }

    pub fn n_injected(&self) -> usize {
        self.attachments.len()
    }

    pub fn features(&self) -> Array2<T> {
        let d = self.injected_features.first().map_or(0, Vec::len);
        Array2::from_shape_fn((self.n_injected(), d), |(i, k)| self.injected_features[i][k])
    }

    /// `j(i)`: the anchor of every injected node.
    pub fn anchor_map(&self) -> Vec<usize> {
        self.attachments.iter().map(|a| a[0]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.attachments.iter().map(Vec::len).sum()
    }

    /// Edges `(original, injected_id)` in the composed numbering.
    pub fn injected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.attachments
            .iter()
            .enumerate()
            .flat_map(move |(i, a)| a.iter().map(move |&v| (v, self.n_original + i)))
    }

    pub fn is_single_edge(&self) -> bool {
        self.attachments.iter().all(|a| a.len() == 1)
    }

    /// Checks the structural invariants against the clean graph: valid and
    /// distinct anchors, at least one edge per injected node, features inside
    /// the clean range.
    pub fn validate(&self, g: &AttributedGraph<T>) -> Result<()> {
        if self.n_original != g.n_nodes() {
            return Err(Error::Validation(format!(
                "plan built for {} nodes, graph has {}",
                self.n_original,
                g.n_nodes()
            )));
        }
        if self.injected_features.len() != self.n_injected()
            || self.assigned_targets.len() != self.n_injected()
        {
            return Err(Error::Validation("plan arrays disagree on N_I".into()));
        }
        for (i, a) in self.attachments.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::Validation(format!("injected node {i} has no edge")));
            }
            if a.iter().any(|&v| v >= g.n_nodes()) {
                return Err(Error::Validation(format!(
                    "injected node {i} attaches outside the original graph"
                )));
            }
            let mut sorted = a.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != a.len() {
                return Err(Error::Validation(format!(
                    "injected node {i} attaches twice to the same node"
                )));
            }
        }
        if !g.feature_range().contains(self.features().view()) {
            return Err(Error::Validation(
                "injected features outside the clean feature range".into(),
            ));
        }
        Ok(())
    }
}

/// `G' = (A', X')` with `A' = [[A, A_Iᵀ], [A_I, 0]]` and `X' = [X; X_I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackedGraph<T> {
    plan: InjectionPlan<T>,
    view: GraphView<T>,
}

impl<T: Scalar> AttackedGraph<T> {
    pub fn compose(base: &AttributedGraph<T>, plan: InjectionPlan<T>) -> Result<Self> {
        plan.validate(base)?;
        let n = base.n_nodes();
        let adjacency = base
            .adjacency()
            .extended(plan.n_injected(), plan.injected_edges())?;
        let mut features = Array2::zeros((n + plan.n_injected(), base.n_features()));
        features.slice_mut(s![..n, ..]).assign(base.features());
        features.slice_mut(s![n.., ..]).assign(&plan.features());
        Ok(AttackedGraph {
            view: GraphView::new(adjacency, features)?,
            plan,
        })
    }

    pub fn plan(&self) -> &InjectionPlan<T> {
        &self.plan
    }

    pub fn view(&self) -> &GraphView<T> {
        &self.view
    }

    pub fn n_original(&self) -> usize {
        self.plan.n_original
    }

    pub fn n_nodes(&self) -> usize {
        self.view.n_nodes()
    }

    pub fn n_edges(&self) -> usize {
        self.view.adjacency.n_edges()
    }

    /// Whether the original block of `A'` and `X'` is bit-identical to `base`.
    pub fn preserves(&self, base: &AttributedGraph<T>) -> bool {
        let n = base.n_nodes();
        let original_edges: Vec<_> = self
            .view
            .adjacency
            .edges()
            .iter()
            .copied()
            .filter(|&(_, v)| v < n)
            .collect();
        original_edges == base.adjacency().edges()
            && self
                .view
                .features
                .slice(s![..n, ..])
                .iter()
                .zip(base.features().iter())
                .all(|(a, b)| a.to_bits_eq(*b))
    }

    /// The composed graph as a plain attributed graph. Injected nodes take
    /// the label of their assigned target; splits are those of `base`.
    pub fn export(&self, base: &AttributedGraph<T>) -> Result<AttributedGraph<T>> {
        let mut labels = base.labels().to_vec();
        labels.extend(self.plan.assigned_targets.iter().map(|&t| base.labels()[t]));
        AttributedGraph::new(
            self.view.clone(),
            labels,
            base.n_classes(),
            base.labeled_set().to_vec(),
            base.target_set().to_vec(),
        )
    }
}

trait BitsEq {
    fn to_bits_eq(self, other: Self) -> bool;
}

impl<T: Scalar> BitsEq for T {
    fn to_bits_eq(self, other: Self) -> bool {
        self.as_f64().to_bits() == other.as_f64().to_bits()
    }
}

/// `N_I = ceil(Pr · N)`, injected nodes assigned round-robin over the
/// targets in ascending id order.
pub fn plan_injections<T: Scalar>(g: &AttributedGraph<T>, cfg: &AttackConfig) -> Result<(Vec<usize>, usize)> {
    cfg.validate()?;
    let targets = g.target_set();
    if targets.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    let n_injected = injected_count(g.n_nodes(), cfg.perturbation_rate);
    let assigned = (0..n_injected).map(|i| targets[i % targets.len()]).collect();
    Ok((assigned, n_injected))
}

pub fn injected_count(n_nodes: usize, rate: f64) -> usize {
    // Absorb representation error so that e.g. 100 * 0.01 stays 1.
    ((rate * n_nodes as f64) - 1e-9).ceil().max(1.0) as usize
}
