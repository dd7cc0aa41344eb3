use ndarray::{Array2, ArrayView2};

use crate::scalar::Scalar;

/// Summed softmax cross-entropy over `nodes` with `labels[u]` as the class of
/// node `u`, and its gradient with respect to the full logit matrix (rows
/// outside `nodes` are zero). Softmax is computed with max subtraction.
pub(crate) fn cross_entropy<T: Scalar>(
    logits: ArrayView2<T>,
    nodes: &[usize],
    labels: &[usize],
) -> (T, Array2<T>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = T::zero();
    for &u in nodes {
        let row = logits.row(u);
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        let y = labels[u];
        total += log_z - row[y];
        let mut g = grad.row_mut(u);
        for (c, &v) in row.iter().enumerate() {
            g[c] = (v - log_z).exp();
        }
        g[y] -= T::one();
    }
    (total, grad)
}

/// Row-wise argmax; ties go to the smaller class id.
pub(crate) fn argmax_rows<T: Scalar>(logits: ArrayView2<T>, nodes: &[usize]) -> Vec<usize> {
    nodes
        .iter()
        .map(|&u| {
            let row = logits.row(u);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
