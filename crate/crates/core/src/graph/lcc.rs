use std::collections::VecDeque;

use ndarray::Axis;

use super::{Adjacency, AttributedGraph, GraphView};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Component id per node; ids are assigned in order of each component's
/// smallest node.
pub(crate) fn components(adj: &Adjacency) -> Vec<usize> {
    let n = adj.n_nodes();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in adj.neighbors(u) {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Induced subgraph on the largest connected component, nodes renumbered in
/// ascending original order. Ties go to the component holding the smallest
/// node id. Splits are restricted to the kept nodes.
pub fn largest_connected_component<T: Scalar>(g: &AttributedGraph<T>) -> Result<AttributedGraph<T>> {
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let comp = components(g.adjacency());
    let n_comp = comp.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; n_comp];
    for &c in &comp {
        sizes[c] += 1;
    }
    let best = (0..n_comp).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
    if sizes[best] == n {
        return Ok(g.clone());
    }

    let kept: Vec<usize> = (0..n).filter(|&u| comp[u] == best).collect();
    let mut new_id = vec![usize::MAX; n];
    for (i, &u) in kept.iter().enumerate() {
        new_id[u] = i;
    }
    let edges = g
        .adjacency()
        .edges()
        .iter()
        .filter(|&&(u, _)| comp[u] == best)
        .map(|&(u, v)| (new_id[u], new_id[v]));
    let (adjacency, _) = Adjacency::from_edges(kept.len(), edges)?;
    let features = g.features().select(Axis(0), &kept);
    let labels = kept.iter().map(|&u| g.labels()[u]).collect();
    let restrict = |set: &[usize]| {
        set.iter()
            .filter(|&&u| comp[u] == best)
            .map(|&u| new_id[u])
            .collect::<Vec<_>>()
    };
    Ok(AttributedGraph::new(
        GraphView::new(adjacency, features)?,
        labels,
        g.n_classes(),
        restrict(g.labeled_set()),
        restrict(g.target_set()),
    )?
    .with_warnings(g.warnings().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph<f64> {
        let (adj, _) = Adjacency::from_edges(n, edges.iter().copied()).unwrap();
        let x = Array2::from_shape_fn((n, 2), |(i, d)| (i * 2 + d) as f64);
        let labels = (0..n).map(|u| u % 2).collect();
        AttributedGraph::new(GraphView::new(adj, x).unwrap(), labels, 2, vec![0, 5], vec![1, 4])
            .unwrap()
    }

    #[test]
    fn keeps_larger_component() {
        let g = graph(6, &[(0, 1), (4, 5), (1, 2), (2, 3)]);
        let l = largest_connected_component(&g).unwrap();
        assert_eq!(l.n_nodes(), 4);
        assert_eq!(l.n_edges(), 3);
        assert_eq!(l.labeled_set(), &[0]);
        assert_eq!(l.target_set(), &[1]);
        assert_eq!(l.features().row(3)[0], 6.0);
    }

    #[test]
    fn relabels_in_ascending_order() {
        let g = graph(6, &[(1, 3), (3, 5), (5, 1), (0, 2)]);
        let l = largest_connected_component(&g).unwrap();
        assert_eq!(l.n_nodes(), 3);
        assert_eq!(l.adjacency().edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(l.features()[[0, 0]], 2.0);
        assert_eq!(l.labeled_set(), &[2]);
        assert_eq!(l.target_set(), &[0]);
    }

    #[test]
    fn connected_graph_unchanged_and_idempotent() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let l = largest_connected_component(&g).unwrap();
        assert_eq!(l, g);
        assert_eq!(largest_connected_component(&l).unwrap(), l);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let view = GraphView::new(Adjacency::empty(0), Array2::<f64>::zeros((0, 1))).unwrap();
        let g = AttributedGraph::new(view, vec![], 1, vec![], vec![]).unwrap();
        assert!(largest_connected_component(&g).is_err());
    }
}
