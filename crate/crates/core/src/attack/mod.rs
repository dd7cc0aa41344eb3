//! The single-edge injection attack: anchor selection, the
//! similarity-regularized objective with its analytic gradient, the
//! generator-driven optimization loop, and two comparison baselines.

mod config;
mod plan;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{features::clamp_with_mask, Adjacency, AttributedGraph, GraphView};
use crate::sampler::{sample_neighborhood, NeighborhoodDump, SampledNeighborhood};
use crate::scalar::Scalar;
use crate::surrogate::{argmax_rows, cosine, cosine_grad, cross_entropy, SurrogateModel, Variant};
use crate::synth::{init_generator, ReverseConvGenerator};

pub use config::{AnchorRule, AttackConfig, LabelSource};
pub use plan::{injected_count, plan_injections, AttackedGraph, InjectionPlan};

/// Target set, the labels the attacker pushes away from, and `α`.
#[derive(Debug, Clone)]
pub struct AttackObjective<T> {
    targets: Vec<usize>,
    labels: Vec<usize>,
    alpha: T,
}

impl<T: Scalar> AttackObjective<T> {
    pub fn new(g: &AttributedGraph<T>, model: &SurrogateModel<T>, cfg: &AttackConfig) -> Result<Self> {
        if g.target_set().is_empty() {
            return Err(Error::Empty("target set".into()));
        }
        let labels = match cfg.label_source {
            LabelSource::GroundTruth => g.labels().to_vec(),
            LabelSource::Predicted => {
                let all: Vec<usize> = (0..g.n_nodes()).collect();
                model.predict(g.view(), &all)?
            }
        };
        Ok(AttackObjective {
            targets: g.target_set().to_vec(),
            labels,
            alpha: T::of(cfg.alpha),
        })
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    fn similarity_reward(&self, view: &GraphView<T>, n_original: usize, anchors: &[usize]) -> T {
        anchors
            .iter()
            .enumerate()
            .map(|(i, &a)| cosine(view.features.row(n_original + i), view.features.row(a)))
            .sum()
    }

    /// `-L_tgt(G') - α Σ_i sim(x_{u_i}, x_{j(i)})`.
    pub fn loss(
        &self,
        model: &SurrogateModel<T>,
        view: &GraphView<T>,
        n_original: usize,
        anchors: &[usize],
    ) -> Result<T> {
        let logits = model.forward_logits(view)?;
        let (ce, _) = cross_entropy(logits.view(), &self.targets, &self.labels);
        Ok(-ce - self.alpha * self.similarity_reward(view, n_original, anchors))
    }

    /// Loss and its gradient with respect to the injected feature rows
    /// (`N_I × D`), with the pruning mask held fixed.
    pub fn loss_and_gradient(
        &self,
        model: &SurrogateModel<T>,
        view: &GraphView<T>,
        n_original: usize,
        anchors: &[usize],
    ) -> Result<(T, Array2<T>)> {
        let (ce, grad) = model.value_and_input_gradient(view, |logits| {
            let (ce, d) = cross_entropy(logits, &self.targets, &self.labels);
            (ce, -d)
        })?;
        let mut grad_injected = grad.slice(s![n_original.., ..]).to_owned();
        for (i, &a) in anchors.iter().enumerate() {
            let g_sim = cosine_grad(view.features.row(n_original + i), view.features.row(a));
            grad_injected.row_mut(i).scaled_add(-self.alpha, &g_sim);
        }
        let loss = -ce - self.alpha * self.similarity_reward(view, n_original, anchors);
        Ok((loss, grad_injected))
    }
}

/// Attack loss of an attacked graph under `model` (used as given; pass a
/// PrSGC model to evaluate the pruning-aware objective).
pub fn attack_loss<T: Scalar>(
    g: &AttributedGraph<T>,
    attacked: &AttackedGraph<T>,
    model: &SurrogateModel<T>,
    cfg: &AttackConfig,
) -> Result<T> {
    AttackObjective::new(g, model, cfg)?.loss(
        model,
        attacked.view(),
        attacked.n_original(),
        &attacked.plan().anchor_map(),
    )
}

/// Gradient of [`attack_loss`] with respect to the injected features.
pub fn attack_gradient<T: Scalar>(
    g: &AttributedGraph<T>,
    attacked: &AttackedGraph<T>,
    model: &SurrogateModel<T>,
    cfg: &AttackConfig,
) -> Result<Array2<T>> {
    Ok(AttackObjective::new(g, model, cfg)?
        .loss_and_gradient(
            model,
            attacked.view(),
            attacked.n_original(),
            &attacked.plan().anchor_map(),
        )?
        .1)
}

/// Anchor candidates for `target`: the target plus its neighbors that made
/// it into layer 1 of the sample, ascending.
pub fn anchor_candidates(adj: &Adjacency, nb: &SampledNeighborhood, target: usize) -> Result<Vec<usize>> {
    if nb.position(0, target).is_none() {
        return Err(Error::Validation(format!(
            "node {target} is not in layer 0 of the sample"
        )));
    }
    let mut out = vec![target];
    out.extend(
        adj.neighbors(target)
            .iter()
            .copied()
            .filter(|&v| nb.position(1, v).is_some()),
    );
    out.sort_unstable();
    Ok(out)
}

/// `‖∂L_tgt / ∂x_v‖` for every node of the clean graph.
pub fn influence_scores<T: Scalar>(
    g: &AttributedGraph<T>,
    model: &SurrogateModel<T>,
    objective: &AttackObjective<T>,
) -> Result<Vec<T>> {
    let (_, grad) = model.value_and_input_gradient(g.view(), |logits| {
        cross_entropy(logits, &objective.targets, &objective.labels)
    })?;
    Ok(grad.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect())
}

fn rank_by_score<T: Scalar>(candidates: &[usize], scores: &[T]) -> Vec<usize> {
    let mut ranked = candidates.to_vec();
    // Stable sort on ascending ids keeps ties toward the smaller id.
    ranked.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    ranked
}

fn pick_anchor<T: Scalar>(target: usize, candidates: &[usize], scores: &[T], rule: AnchorRule) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty(format!("anchor candidates for target {target}")));
    }
    Ok(match rule {
        AnchorRule::TargetSelf => target,
        AnchorRule::BestGradient => rank_by_score(candidates, scores)[0],
    })
}

/// Chooses the anchor of an injected node assigned to `target`.
pub fn select_anchor<T: Scalar>(
    g: &AttributedGraph<T>,
    nb: &SampledNeighborhood,
    model: &SurrogateModel<T>,
    target: usize,
    rule: AnchorRule,
) -> Result<usize> {
    let candidates = anchor_candidates(g.adjacency(), nb, target)?;
    let scores = match rule {
        AnchorRule::TargetSelf => vec![T::zero(); g.n_nodes()],
        AnchorRule::BestGradient => {
            let objective = AttackObjective::new(g, model, &AttackConfig::default())?;
            influence_scores(g, model, &objective)?
        }
    };
    pick_anchor(target, &candidates, &scores, rule)
}

/// Result of one attack run.
#[derive(Debug, Clone)]
pub struct AttackOutcome<T> {
    pub attacked: AttackedGraph<T>,
    /// Attack loss at every iteration (empty for the random baseline).
    pub trace: Vec<f64>,
    pub generator: Option<ReverseConvGenerator<T>>,
    pub neighborhood: Option<NeighborhoodDump>,
}

impl<T: Scalar> AttackOutcome<T> {
    /// Fraction of consecutive trace steps that did not increase the loss.
    pub fn monotone_fraction(&self) -> f64 {
        if self.trace.len() < 2 {
            return 1.0;
        }
        let ok = self.trace.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (self.trace.len() - 1) as f64
    }
}

/// The linear surrogate the attack optimizes against: the model's weights
/// under PrSGC with the attack's pruning threshold.
pub fn attack_surrogate<T: Scalar>(model: &SurrogateModel<T>, cfg: &AttackConfig) -> Result<SurrogateModel<T>> {
    if model.variant() == Variant::Gcn2 {
        return Err(Error::Precondition(
            "the attack surrogate must be linear (sgc or prsgc)".into(),
        ));
    }
    model.as_variant(Variant::PrSgc, Some(T::of(cfg.epsilon)))
}

/// Generator-driven injection with `edges_per_node` edges per injected node.
/// The first edge goes to the anchor chosen by `cfg.anchor_rule`; further
/// edges go to the highest-influence remaining candidates, widening to the
/// sampled neighborhood and then the whole graph when the target has too few. With one edge per
/// node this is exactly the single-edge attack.
pub fn run_injection<T: Scalar>(
    g: &AttributedGraph<T>,
    model: &SurrogateModel<T>,
    cfg: &AttackConfig,
    edges_per_node: usize,
) -> Result<AttackOutcome<T>> {
    cfg.validate()?;
    if edges_per_node == 0 {
        return Err(Error::Validation("edges_per_node must be at least 1".into()));
    }
    let surrogate = attack_surrogate(model, cfg)?;
    let objective = AttackObjective::new(g, &surrogate, cfg)?;
    let (assigned, n_injected) = plan_injections(g, cfg)?;
    let n = g.n_nodes();

    let nb = sample_neighborhood(g.adjacency(), g.target_set(), cfg.depth, cfg.fanout, cfg.seed)?;
    for k in 1..=nb.depth() {
        let zero = nb.zero_rows(k);
        if zero > 0 {
            log::warn!("layer {k}: {zero} sampled node(s) without an outer-layer neighbor");
        }
    }
    let mut generator = init_generator::<T>(cfg.depth, g.n_features(), cfg.seed)?;

    let needs_scores = cfg.anchor_rule == AnchorRule::BestGradient || edges_per_node > 1;
    let scores = if needs_scores {
        influence_scores(g, &surrogate, &objective)?
    } else {
        vec![T::zero(); n]
    };
    let attachments = assigned
        .iter()
        .map(|&t| {
            let candidates = anchor_candidates(g.adjacency(), &nb, t)?;
            let anchor = pick_anchor(t, &candidates, &scores, cfg.anchor_rule)?;
            let mut edges = vec![anchor];
            fill(&mut edges, &rank_by_score(&candidates, &scores), edges_per_node);
            if edges.len() < edges_per_node {
                // Too few 1-hop candidates: widen to the whole sample, then the graph.
                fill(&mut edges, &rank_by_score(nb.layer(nb.depth()), &scores), edges_per_node);
                fill(&mut edges, &rank_by_score(&(0..n).collect::<Vec<_>>(), &scores), edges_per_node);
            }
            Ok(edges)
        })
        .collect::<Result<Vec<_>>>()?;
    let anchors: Vec<usize> = attachments.iter().map(|a| a[0]).collect();
    let rows: Vec<usize> = assigned
        .iter()
        .map(|&t| nb.position(0, t).expect("targets form layer 0"))
        .collect();

    let skeleton = InjectionPlan::new(
        n,
        Array2::<T>::zeros((n_injected, g.n_features())).view(),
        attachments,
        assigned.clone(),
    );
    let adjacency = g.adjacency().extended(n_injected, skeleton.injected_edges())?;
    let mut features = Array2::zeros((n + n_injected, g.n_features()));
    features.slice_mut(s![..n, ..]).assign(g.features());
    let mut view = GraphView::new(adjacency, features)?;

    let step = T::of(cfg.step_size);
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let raw = generator.synthesize_raw(&nb, g)?;
        let (x0, inside) = clamp_with_mask(raw.view(), g.feature_range())?;
        for (i, &r) in rows.iter().enumerate() {
            view.features.row_mut(n + i).assign(&x0.row(r));
        }
        let (loss, grad) = objective.loss_and_gradient(&surrogate, &view, n, &anchors)?;
        trace.push(loss.as_f64());
        if !loss.is_finite() {
            return Err(Error::AttackDiverged { step: it, trace });
        }
        if it + 1 == cfg.iterations {
            break;
        }
        let mut upstream = Array2::zeros(x0.raw_dim());
        for (i, &r) in rows.iter().enumerate() {
            let mut row = upstream.row_mut(r);
            row.scaled_add(T::one(), &(&grad.row(i) * &inside.row(r)));
        }
        let ggrad = generator.gradient(&nb, &upstream)?;
        generator.descend(&ggrad, step);
    }

    let injected = view.features.slice(s![n.., ..]).to_owned();
    let plan = InjectionPlan::new(n, injected.view(), skeleton.attachments, assigned);
    Ok(AttackOutcome {
        attacked: AttackedGraph::compose(g, plan)?,
        trace,
        generator: Some(generator),
        neighborhood: Some(nb.debug_dump()),
    })
}

fn fill(edges: &mut Vec<usize>, ranked: &[usize], want: usize) {
    for &v in ranked {
        if edges.len() >= want {
            return;
        }
        if !edges.contains(&v) {
            edges.push(v);
        }
    }
}

/// Single-edge graph injection attack.
pub fn run_segia<T: Scalar>(
    g: &AttributedGraph<T>,
    model: &SurrogateModel<T>,
    cfg: &AttackConfig,
) -> Result<AttackOutcome<T>> {
    run_injection(g, model, cfg, 1)
}

/// Conventional multi-edge comparator: the same optimization with the
/// similarity term switched off (`α = 0`) and `edges_per_node` edges per
/// injected node.
pub fn run_baseline_multiedge<T: Scalar>(
    g: &AttributedGraph<T>,
    model: &SurrogateModel<T>,
    cfg: &AttackConfig,
    edges_per_node: usize,
) -> Result<AttackOutcome<T>> {
    let cfg = AttackConfig {
        alpha: 0.0,
        ..cfg.clone()
    };
    run_injection(g, model, &cfg, edges_per_node)
}

/// Control arm: single edge to the assigned target, features uniform in the
/// clean range under `cfg.seed`.
pub fn run_baseline_random<T: Scalar>(
    g: &AttributedGraph<T>,
    _model: &SurrogateModel<T>,
    cfg: &AttackConfig,
) -> Result<AttackOutcome<T>> {
    let (assigned, n_injected) = plan_injections(g, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bounds = g.feature_range().bounds();
    let features = Array2::from_shape_fn((n_injected, g.n_features()), |(_, d)| {
        let (lo, hi) = (bounds[d].0.as_f64(), bounds[d].1.as_f64());
        let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        T::of(v).max(bounds[d].0).min(bounds[d].1)
    });
    let attachments = assigned.iter().map(|&t| vec![t]).collect();
    let plan = InjectionPlan::new(g.n_nodes(), features.view(), attachments, assigned);
    Ok(AttackOutcome {
        attacked: AttackedGraph::compose(g, plan)?,
        trace: Vec::new(),
        generator: None,
        neighborhood: None,
    })
}

/// Serialized attack output.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PlanFile<'a, T, C: Serialize> {
    pub injected_features: &'a [Vec<T>],
    pub anchor_map: Vec<usize>,
    pub attachments: &'a [Vec<usize>],
    pub assigned_targets: &'a [usize],
    pub n_original: usize,
    pub config: &'a C,
    pub trace: &'a [f64],
}

impl<T: Scalar> AttackOutcome<T> {
    pub fn plan_file<'a, C: Serialize>(&'a self, config: &'a C) -> PlanFile<'a, T, C> {
        let plan = self.attacked.plan();
        PlanFile {
            injected_features: &plan.injected_features,
            anchor_map: plan.anchor_map(),
            attachments: &plan.attachments,
            assigned_targets: &plan.assigned_targets,
            n_original: plan.n_original,
            config,
            trace: &self.trace,
        }
    }
}

/// Predicted classes of `nodes` under `model` on an arbitrary view.
pub fn predictions<T: Scalar>(model: &SurrogateModel<T>, view: &GraphView<T>, nodes: &[usize]) -> Result<Vec<usize>> {
    let logits = model.forward_logits(view)?;
    Ok(argmax_rows(logits.view(), nodes))
}
