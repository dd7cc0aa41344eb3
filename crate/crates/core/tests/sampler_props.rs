mod common;

use common::random_graph;
use proptest::prelude::*;
use segia_core::sampler::{sample_neighborhood, sampling_cost_estimate};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layers_grow_soundly(n in 4usize..50, p in 0.0f64..0.4, seed in any::<u64>(), depth in 1usize..4, fanout in 1usize..6) {
        let g = random_graph(n, 2, 2, p, seed);
        let adj = g.adjacency();
        let nb = sample_neighborhood(adj, g.target_set(), depth, fanout, seed).unwrap();
        prop_assert_eq!(nb.layer(0), g.target_set());
        for k in 1..=depth {
            let (inner, outer) = (nb.layer(k - 1), nb.layer(k));
            prop_assert!(outer.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(inner.iter().all(|u| outer.binary_search(u).is_ok()));
            for &v in outer.iter().filter(|v| inner.binary_search(v).is_err()) {
                prop_assert!(inner.iter().any(|&u| adj.has_edge(u, v)), "node {} has no inner neighbor", v);
            }
            prop_assert!(outer.len() <= inner.len() * (1 + fanout));
        }
        let again = sample_neighborhood(adj, g.target_set(), depth, fanout, seed).unwrap();
        prop_assert_eq!(again, nb);
    }

    #[test]
    fn large_fanout_takes_whole_neighborhood(n in 4usize..30, seed in any::<u64>()) {
        let g = random_graph(n, 2, 2, 0.2, seed);
        let adj = g.adjacency();
        let nb = sample_neighborhood(adj, g.target_set(), 1, n, seed).unwrap();
        let mut expected: Vec<usize> = g.target_set().to_vec();
        for &t in g.target_set() {
            expected.extend_from_slice(adj.neighbors(t));
        }
        expected.sort_unstable();
        expected.dedup();
        prop_assert_eq!(nb.layer(1), &expected[..]);
        prop_assert_eq!(nb.zero_rows(1), 0);
    }
}

#[test]
fn cost_estimate() {
    assert_eq!(sampling_cost_estimate(20, 10, 2), 2000);
    assert_eq!(sampling_cost_estimate(1, 10, 0), 1);
    assert_eq!(sampling_cost_estimate(u64::MAX, 10, 3), u64::MAX);
    assert_eq!(sampling_cost_estimate(2, 1 << 32, 3), u64::MAX);
}

#[test]
fn rejects_bad_arguments() {
    let g = random_graph(10, 2, 2, 0.2, 0);
    assert!(sample_neighborhood(g.adjacency(), &[], 1, 1, 0).is_err());
    assert!(sample_neighborhood(g.adjacency(), &[3], 0, 1, 0).is_err());
    assert!(sample_neighborhood(g.adjacency(), &[3], 1, 0, 0).is_err());
    assert!(sample_neighborhood(g.adjacency(), &[10], 1, 1, 0).is_err());
}
