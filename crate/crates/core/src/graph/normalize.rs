use super::Adjacency;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Symmetrically normalized adjacency with self-loops,
/// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    pub matrix: CsrMatrix<T>,
    /// `d_u + 1` per node.
    pub degrees: Vec<usize>,
}

pub fn normalize_adjacency<T: Scalar>(adj: &Adjacency) -> NormalizedAdjacency<T> {
    normalize_masked(adj, |_, _| true)
}

/// Normalization over the full self-looped support, with entries for which
/// `keep(u, v)` is false zeroed afterwards (the Hadamard product with a
/// pruning mask). Degrees are never recomputed after masking.
pub(crate) fn normalize_masked<T: Scalar>(
    adj: &Adjacency,
    keep: impl Fn(usize, usize) -> bool,
) -> NormalizedAdjacency<T> {
    let n = adj.n_nodes();
    let degrees: Vec<usize> = (0..n).map(|u| adj.degree(u) + 1).collect();
    let inv_sqrt: Vec<T> = degrees
        .iter()
        .map(|&d| T::one() / T::of(d as f64).sqrt())
        .collect();
    let triplets = (0..n).flat_map(|u| {
        std::iter::once(u)
            .chain(adj.neighbors(u).iter().copied())
            .filter(|&v| v == u || keep(u, v))
            .map(|v| (u, v, inv_sqrt[u] * inv_sqrt[v]))
            .collect::<Vec<_>>()
    });
    let matrix = CsrMatrix::from_triplets(n, n, triplets).expect("indices from adjacency");
    NormalizedAdjacency { matrix, degrees }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let (adj, _) = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let a = normalize_adjacency::<f64>(&adj).matrix.to_dense();
        assert!(a.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn triangle_uniform() {
        let (adj, _) = Adjacency::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let a = normalize_adjacency::<f64>(&adj).matrix.to_dense();
        assert!(a.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn path_entry() {
        let (adj, _) = Adjacency::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let n = normalize_adjacency::<f64>(&adj);
        assert_eq!(n.degrees, vec![2, 3, 2]);
        assert!((n.matrix.get(0, 1) - 0.408_248_290_463_863).abs() < 1e-12);
        assert_eq!(n.matrix.get(0, 2), 0.0);
    }
}
