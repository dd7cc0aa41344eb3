#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segia_core::graph::{Adjacency, AttributedGraph, GraphView};
use segia_core::Graph;

/// Random connected graph: a random spanning tree plus Bernoulli(p) extra
/// edges, Gaussian-ish features, labels `u % c`, the first half labeled and
/// up to four of the rest as targets.
pub fn random_graph(n: usize, d: usize, c: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let (adj, _) = Adjacency::from_edges(n, edges).unwrap();
    let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
    let labels = (0..n).map(|u| u % c).collect();
    let half = n.div_ceil(2).max(c);
    let labeled = (0..half).collect();
    let targets = (half..n).take(4).collect();
    AttributedGraph::new(GraphView::new(adj, x).unwrap(), labels, c, labeled, targets).unwrap()
}

/// Dense `D^{-1/2}(A ⊙ K + I)D^{-1/2}` with degrees of the unmasked graph,
/// where `K[u][v] = keep(u, v)` (diagonal always kept).
pub fn dense_propagation(adj: &Adjacency, keep: impl Fn(usize, usize) -> bool) -> Array2<f64> {
    let n = adj.n_nodes();
    let a: Array2<f64> = adj.to_dense();
    let deg: Vec<f64> = (0..n).map(|u| a.row(u).sum() + 1.0).collect();
    Array2::from_shape_fn((n, n), |(u, v)| {
        let entry = if u == v { 1.0 } else if keep(u, v) { a[[u, v]] } else { 0.0 };
        entry / (deg[u] * deg[v]).sqrt()
    })
}

pub fn cos(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` over every entry of `x`.
pub fn central_differences(x: &Array2<f64>, h: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = x.as_slice().unwrap()[idx];
        probe.as_slice_mut().unwrap()[idx] = orig + h;
        let up = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig - h;
        let down = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig;
        out.push((up - down) / (2.0 * h));
    }
    out
}
