//! Sparse forward passes against dense brute-force references, and the
//! degenerate-parameter identities.

mod common;

use common::{cos, dense_propagation, max_abs_diff, random_graph};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segia_core::attack::{attack_loss, AttackConfig, AttackedGraph, InjectionPlan};
use segia_core::defense::prune_defense;
use segia_core::graph::normalize_adjacency;
use segia_core::sampler::sample_neighborhood;
use segia_core::surrogate::{build_pruning_mask, SurrogateModel};
use segia_core::synth::ReverseConvGenerator;
use segia_core::Graph;

const EXACT: f64 = 1e-12;

fn graph_strategy() -> impl Strategy<Value = (Graph, u64)> {
    (4usize..=50, 1usize..=8, 2usize..=4, 0.0f64..0.3, any::<u64>())
        .prop_map(|(n, d, c, p, seed)| (random_graph(n, d, c.min(n / 2), p, seed), seed))
}

fn weights(seed: u64, r: usize, c: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_matches_dense((g, _) in graph_strategy()) {
        let sparse = normalize_adjacency(g.adjacency()).matrix.to_dense();
        let dense = dense_propagation(g.adjacency(), |_, _| true);
        prop_assert!(max_abs_diff(&sparse, &dense) < EXACT);
        prop_assert!(max_abs_diff(&sparse, &sparse.t().to_owned()) == 0.0);
    }

    #[test]
    fn sgc_logits_match_dense((g, seed) in graph_strategy()) {
        let w = weights(seed, g.n_features(), g.n_classes());
        let m = SurrogateModel::sgc(g.n_features(), g.n_classes()).with_weights(vec![w.clone()]).unwrap();
        let s = dense_propagation(g.adjacency(), |_, _| true);
        let dense = s.dot(&s).dot(g.features()).dot(&w);
        prop_assert!(max_abs_diff(&m.forward_logits(g.view()).unwrap(), &dense) < EXACT);
    }

    #[test]
    fn prsgc_logits_match_dense((g, seed) in graph_strategy(), eps in -1.0f64..1.0) {
        let w = weights(seed, g.n_features(), g.n_classes());
        let m = SurrogateModel::prsgc(g.n_features(), g.n_classes(), eps).unwrap().with_weights(vec![w.clone()]).unwrap();
        let x = g.features();
        let s = dense_propagation(g.adjacency(), |u, v| cos(x.row(u), x.row(v)) >= eps);
        let dense = s.dot(&s).dot(x).dot(&w);
        prop_assert!(max_abs_diff(&m.forward_logits(g.view()).unwrap(), &dense) < EXACT);
    }

    #[test]
    fn gcn2_logits_match_dense((g, seed) in graph_strategy()) {
        let (d, c) = (g.n_features(), g.n_classes());
        let (w1, w2) = (weights(seed, d, 6), weights(seed ^ 1, 6, c));
        let m = SurrogateModel::gcn2(d, 6, c, 0).with_weights(vec![w1.clone(), w2.clone()]).unwrap();
        let s = dense_propagation(g.adjacency(), |_, _| true);
        let hidden = s.dot(g.features()).dot(&w1).mapv(|v| v.max(0.0));
        let dense = s.dot(&hidden).dot(&w2);
        prop_assert!(max_abs_diff(&m.forward_logits(g.view()).unwrap(), &dense) < EXACT);
    }

    #[test]
    fn prsgc_at_minus_one_is_sgc((g, seed) in graph_strategy()) {
        let w = weights(seed, g.n_features(), g.n_classes());
        let sgc = SurrogateModel::sgc(g.n_features(), g.n_classes()).with_weights(vec![w.clone()]).unwrap();
        let pr = SurrogateModel::prsgc(g.n_features(), g.n_classes(), -1.0).unwrap().with_weights(vec![w]).unwrap();
        let diff = max_abs_diff(&sgc.forward_logits(g.view()).unwrap(), &pr.forward_logits(g.view()).unwrap());
        prop_assert!(diff < EXACT);
    }

    #[test]
    fn sgc_is_linear_in_features((g, seed) in graph_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let w = weights(seed, g.n_features(), g.n_classes());
        let m = SurrogateModel::sgc(g.n_features(), g.n_classes()).with_weights(vec![w]).unwrap();
        let y = weights(seed ^ 7, g.n_nodes(), g.n_features());
        let view = |x: Array2<f64>| segia_core::graph::GraphView::new(g.adjacency().clone(), x).unwrap();
        let mixed = m.forward_logits(&view(g.features() * a + &y * b)).unwrap();
        let split = m.forward_logits(g.view()).unwrap() * a + m.forward_logits(&view(y)).unwrap() * b;
        prop_assert!(max_abs_diff(&mixed, &split) < 1e-10);
    }

    #[test]
    fn pruning_mask_is_symmetric((g, _) in graph_strategy(), eps in -1.0f64..1.0) {
        let m = build_pruning_mask(g.view(), eps).unwrap();
        let dense = m.to_dense();
        prop_assert_eq!(&dense, &dense.t().to_owned());
        prop_assert_eq!(m.kept_edges().len() + m.pruned_edges().len(), g.n_edges());
    }

    #[test]
    fn connectivity_matches_brute_force((g, seed) in graph_strategy(), depth in 1usize..=3, fanout in 1usize..=4) {
        let nb = sample_neighborhood(g.adjacency(), g.target_set(), depth, fanout, seed).unwrap();
        let a: Array2<f64> = g.adjacency().to_dense();
        for k in 1..=depth {
            let (inner, outer) = (nb.layer(k - 1), nb.layer(k));
            let brute = Array2::from_shape_fn((inner.len(), outer.len()), |(i, j)| a[[inner[i], outer[j]]]);
            prop_assert_eq!(nb.connectivity::<f64>(k).to_dense(), brute.clone());
            let sums = brute.sum_axis(Axis(1));
            let normalized = Array2::from_shape_fn(brute.dim(), |(i, j)| {
                if sums[i] == 0.0 { 0.0 } else { brute[[i, j]] / sums[i] }
            });
            prop_assert!(max_abs_diff(&nb.normalized::<f64>(k).to_dense(), &normalized) < EXACT);
        }
    }

    #[test]
    fn reverse_convolution_matches_dense((g, seed) in graph_strategy(), depth in 1usize..=3) {
        let d = g.n_features();
        let nb = sample_neighborhood(g.adjacency(), g.target_set(), depth, 3, seed).unwrap();
        let ws: Vec<Array2<f64>> = (0..depth).map(|k| weights(seed ^ k as u64, d, d)).collect();
        let bias = Array1::from_shape_fn(d, |i| i as f64 * 0.1 - 0.2);
        let mut gen = ReverseConvGenerator::from_parts(ws.clone(), bias.clone(), 0).unwrap();
        let out = gen.synthesize_raw(&nb, &g).unwrap();

        let a: Array2<f64> = g.adjacency().to_dense();
        let mut x = g.features().select(Axis(0), nb.layer(depth));
        for k in (1..=depth).rev() {
            let (inner, outer) = (nb.layer(k - 1), nb.layer(k));
            let mut m = Array2::from_shape_fn((inner.len(), outer.len()), |(i, j)| a[[inner[i], outer[j]]]);
            for mut row in m.rows_mut() {
                let s = row.sum();
                if s > 0.0 {
                    row /= s;
                }
            }
            x = m.dot(&x).dot(&ws[k - 1]).mapv(|v| v.max(0.0));
        }
        prop_assert!(max_abs_diff(&out, &(x + &bias)) < EXACT);
    }

    #[test]
    fn pruning_at_minus_one_is_identity((g, _) in graph_strategy()) {
        let (pruned, report) = prune_defense(g.view(), g.n_nodes(), -1.0).unwrap();
        prop_assert_eq!(pruned.adjacency.edges(), g.adjacency().edges());
        prop_assert!(report.pruned_edges.is_empty());
    }
}

#[test]
fn attack_loss_without_regularizer_or_pruning_is_negative_target_loss() {
    for seed in 0..20 {
        let g = random_graph(25, 5, 3, 0.15, seed);
        let w = weights(seed, 5, 3);
        let sgc = SurrogateModel::sgc(5, 3).with_weights(vec![w.clone()]).unwrap();
        let pr = SurrogateModel::prsgc(5, 3, -1.0).unwrap().with_weights(vec![w]).unwrap();
        let x = weights(seed ^ 3, 2, 5);
        let t = g.target_set()[0];
        let plan = InjectionPlan::new(g.n_nodes(), x.view(), vec![vec![t], vec![t]], vec![t, t]);
        let attacked = AttackedGraph::compose(&g, plan).unwrap();
        let cfg = AttackConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let loss = attack_loss(&g, &attacked, &pr, &cfg).unwrap();
        let tgt = sgc.loss_on_targets(attacked.view(), g.labels(), g.target_set()).unwrap();
        assert!((loss + tgt).abs() < EXACT, "seed {seed}: {loss} vs {}", -tgt);
    }
}
