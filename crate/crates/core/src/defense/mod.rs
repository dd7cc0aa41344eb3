//! The homophily-pruning defender, node-centric homophily and its
//! distribution distances, evaluation metrics, and the empirical check of
//! the SEGIA-vs-GIA homophily and defended-loss inequalities.

mod theorem;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::attack::AttackedGraph;
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphView};
use crate::scalar::Scalar;
use crate::surrogate::{argmax_rows, cosine, SurrogateModel};

pub use theorem::{theorem1_check, SeedComparison, Theorem1Options, Theorem1Report};

/// `h_u = sim(r_u, x_u)` with `r_u = Σ_{j ∈ N(u)} x_j / sqrt(d_j d_u)`,
/// degrees counted without self-loops. `None` for isolated nodes.
pub fn node_homophily<T: Scalar>(g: &GraphView<T>, u: usize) -> Result<Option<T>> {
    if u >= g.n_nodes() {
        return Err(Error::Validation(format!(
            "node {u} outside [0, {})",
            g.n_nodes()
        )));
    }
    let adj = &g.adjacency;
    let d_u = adj.degree(u);
    if d_u == 0 {
        return Ok(None);
    }
    let mut r = Array1::zeros(g.n_features());
    for &j in adj.neighbors(u) {
        let w = T::one() / T::of((adj.degree(j) * d_u) as f64).sqrt();
        r.scaled_add(w, &g.features.row(j));
    }
    Ok(Some(cosine(r.view(), g.features.row(u))))
}

/// Homophily scores of every non-isolated node of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HomophilyProfile<T> {
    pub scores: Vec<T>,
    /// Nodes that were skipped for having no neighbor.
    pub isolated: Vec<usize>,
    pub fingerprint: String,
}

impl<T: Scalar> HomophilyProfile<T> {
    pub fn of(g: &GraphView<T>) -> Self {
        let mut scores = Vec::with_capacity(g.n_nodes());
        let mut isolated = Vec::new();
        for u in 0..g.n_nodes() {
            match node_homophily(g, u).expect("node in range") {
                Some(h) => scores.push(h),
                None => isolated.push(u),
            }
        }
        HomophilyProfile {
            scores,
            isolated,
            fingerprint: g.fingerprint(),
        }
    }

    pub fn from_scores(scores: Vec<T>) -> Self {
        HomophilyProfile {
            scores,
            isolated: Vec::new(),
            fingerprint: String::new(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().map(|s| s.as_f64()).sum::<f64>() / self.scores.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Wasserstein1,
    TotalVariation,
}

pub const TV_BINS: usize = 50;

/// Distance between two homophily-score distributions.
///
/// `Wasserstein1` resamples both sorted samples to the larger size at
/// mid-point quantiles and averages the absolute differences;
/// `TotalVariation` is half the L1 distance of 50-bin histograms on
/// `[-1, 1]`.
pub fn homophily_distance<T: Scalar>(
    a: &HomophilyProfile<T>,
    b: &HomophilyProfile<T>,
    metric: DistanceMetric,
) -> Result<f64> {
    if a.scores.is_empty() || b.scores.is_empty() {
        return Err(Error::Empty("homophily profile".into()));
    }
    let a: Vec<f64> = a.scores.iter().map(|v| v.as_f64()).collect();
    let b: Vec<f64> = b.scores.iter().map(|v| v.as_f64()).collect();
    Ok(match metric {
        DistanceMetric::Wasserstein1 => wasserstein1(a, b),
        DistanceMetric::TotalVariation => {
            let (ha, hb) = (histogram(&a), histogram(&b));
            0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>()
        }
    })
}

fn wasserstein1(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let m = a.len().max(b.len());
    let quantile = |s: &[f64], q: f64| s[((q * s.len() as f64) as usize).min(s.len() - 1)];
    (0..m)
        .map(|i| {
            let q = (i as f64 + 0.5) / m as f64;
            (quantile(&a, q) - quantile(&b, q)).abs()
        })
        .sum::<f64>()
        / m as f64
}

fn histogram(xs: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; TV_BINS];
    for &x in xs {
        let bin = (((x + 1.0) / 2.0) * TV_BINS as f64).floor();
        h[(bin.max(0.0) as usize).min(TV_BINS - 1)] += 1.0;
    }
    let total = xs.len() as f64;
    h.iter_mut().for_each(|v| *v /= total);
    h
}

/// What a single pruning pass removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub epsilon: f64,
    pub pruned_edges: Vec<(usize, usize)>,
    /// Edges with an endpoint at or above the original node count.
    pub injected_edges: usize,
    pub surviving_injected_edges: usize,
    pub post_defense_logits_source: Option<String>,
}

impl DefenseReport {
    pub fn surviving_injected_rate(&self) -> f64 {
        if self.injected_edges == 0 {
            1.0
        } else {
            self.surviving_injected_edges as f64 / self.injected_edges as f64
        }
    }
}

/// Removes every edge whose endpoint features have cosine similarity below
/// `epsilon`, judged on the pre-pruning features in a single pass. Nodes
/// with id `>= n_original` are counted as injected.
pub fn prune_defense<T: Scalar>(
    g: &GraphView<T>,
    n_original: usize,
    epsilon: f64,
) -> Result<(GraphView<T>, DefenseReport)> {
    if !(-1.0..=1.0).contains(&epsilon) {
        return Err(Error::Validation(format!("epsilon {epsilon} outside [-1, 1]")));
    }
    let eps = T::of(epsilon);
    let mut pruned = Vec::new();
    let adjacency = g.adjacency.filter_edges(|u, v| {
        let keep = cosine(g.features.row(u), g.features.row(v)) >= eps;
        if !keep {
            pruned.push((u, v));
        }
        keep
    });
    let injected = |&(_, v): &(usize, usize)| v >= n_original;
    let report = DefenseReport {
        epsilon,
        injected_edges: g.adjacency.edges().iter().filter(|e| injected(e)).count(),
        surviving_injected_edges: adjacency.edges().iter().filter(|e| injected(e)).count(),
        pruned_edges: pruned,
        post_defense_logits_source: None,
    };
    Ok((GraphView::new(adjacency, g.features.clone())?, report))
}

pub fn defend_attacked<T: Scalar>(attacked: &AttackedGraph<T>, epsilon: f64) -> Result<(GraphView<T>, DefenseReport)> {
    prune_defense(attacked.view(), attacked.n_original(), epsilon)
}

pub fn defend_clean<T: Scalar>(g: &AttributedGraph<T>, epsilon: f64) -> Result<(GraphView<T>, DefenseReport)> {
    prune_defense(g.view(), g.n_nodes(), epsilon)
}

/// Fraction of `targets` whose predicted class differs from `labels`.
pub fn misclassification_rate<T: Scalar>(
    model: &SurrogateModel<T>,
    view: &GraphView<T>,
    targets: &[usize],
    labels: &[usize],
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    let pred = model.predict(view, targets)?;
    let wrong = pred.iter().zip(targets).filter(|(&p, &t)| p != labels[t]).count();
    Ok(wrong as f64 / targets.len() as f64)
}

/// Clean, attacked and defended victim metrics for one attacked graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub clean_rate: f64,
    /// Defender applied to the clean graph.
    pub clean_defended_rate: f64,
    pub attacked_rate: f64,
    pub defended_rate: f64,
    pub node_budget: usize,
    pub edge_budget: usize,
    pub surviving_injected_edges: usize,
    pub surviving_injected_rate: f64,
    pub pruned_edges: usize,
    pub homophily_w1: f64,
    pub homophily_tv: f64,
    pub mean_anchor_similarity: f64,
}

pub fn evaluate_attack<T: Scalar>(
    victim: &SurrogateModel<T>,
    g: &AttributedGraph<T>,
    attacked: &AttackedGraph<T>,
    defense_epsilon: f64,
) -> Result<AttackMetrics> {
    let targets = g.target_set();
    let labels = g.labels();
    let (defended, report) = defend_attacked(attacked, defense_epsilon)?;
    let (clean_defended, _) = defend_clean(g, defense_epsilon)?;
    let clean_profile = HomophilyProfile::of(g.view());
    let attacked_profile = HomophilyProfile::of(attacked.view());
    let view = attacked.view();
    let n = attacked.n_original();
    let plan = attacked.plan();
    let mean_anchor_similarity = plan
        .anchor_map()
        .iter()
        .enumerate()
        .map(|(i, &a)| cosine(view.features.row(n + i), view.features.row(a)).as_f64())
        .sum::<f64>()
        / plan.n_injected().max(1) as f64;
    Ok(AttackMetrics {
        clean_rate: misclassification_rate(victim, g.view(), targets, labels)?,
        clean_defended_rate: misclassification_rate(victim, &clean_defended, targets, labels)?,
        attacked_rate: misclassification_rate(victim, view, targets, labels)?,
        defended_rate: misclassification_rate(victim, &defended, targets, labels)?,
        node_budget: plan.n_injected(),
        edge_budget: plan.edge_count(),
        surviving_injected_edges: report.surviving_injected_edges,
        surviving_injected_rate: report.surviving_injected_rate(),
        pruned_edges: report.pruned_edges.len(),
        homophily_w1: homophily_distance(&clean_profile, &attacked_profile, DistanceMetric::Wasserstein1)?,
        homophily_tv: homophily_distance(&clean_profile, &attacked_profile, DistanceMetric::TotalVariation)?,
        mean_anchor_similarity,
    })
}

/// Accuracy on `nodes`, the complement of the misclassification rate.
pub fn accuracy<T: Scalar>(model: &SurrogateModel<T>, view: &GraphView<T>, nodes: &[usize], labels: &[usize]) -> Result<f64> {
    let logits = model.forward_logits(view)?;
    let pred = argmax_rows(logits.view(), nodes);
    Ok(pred.iter().zip(nodes).filter(|(&p, &u)| p == labels[u]).count() as f64 / nodes.len() as f64)
}
