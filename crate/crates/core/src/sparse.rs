//! Compressed sparse row matrices with real values.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse matrix in compressed row form. Column indices within a row are
/// strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols} matrix"
                )));
            }
            rows[r].push((c, v));
        }
        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if indices.len() > *offsets.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            offsets: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|r| self.row(r).1.iter().copied().sum())
            .collect()
    }

    /// Same sparsity pattern with values replaced by `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }

    /// Divides each nonzero row by its sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        let sums = self.row_sums();
        self.map_values(|r, _, v| {
            if sums[r] == T::zero() {
                v
            } else {
                v / sums[r]
            }
        })
    }

    pub fn transpose(&self) -> Self {
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, self.iter().map(|(r, c, v)| (c, r, v)))
            .expect("transposed coordinates in range")
    }

    /// Sparse-dense product `self * rhs`.
    pub fn matmul_dense(&self, rhs: ArrayView2<T>) -> Result<Array2<T>> {
        if rhs.nrows() != self.n_cols {
            return Err(Error::Dimension(format!(
                "sparse {}x{} times dense {}x{}",
                self.n_rows,
                self.n_cols,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = Array2::zeros((self.n_rows, rhs.ncols()));
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &rhs.row(c));
            }
        }
        Ok(out)
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn transpose_matmul_dense(&self, rhs: ArrayView2<T>) -> Result<Array2<T>> {
        if rhs.nrows() != self.n_rows {
            return Err(Error::Dimension(format!(
                "transposed sparse {}x{} times dense {}x{}",
                self.n_cols,
                self.n_rows,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = Array2::zeros((self.n_cols, rhs.ncols()));
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &rhs.row(r));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn row_normalize_cases() {
        let m = CsrMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 1.0f64), (0, 1, 1.0), (0, 3, 1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let n = m.row_normalized();
        for c in [0, 1, 3] {
            assert!((n.get(0, c) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(n.get(0, 2), 0.0);
        assert_eq!(n.row(1).0.len(), 0);
        assert_eq!(n.get(2, 2), 1.0);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(1, 2, vec![(0, 1, 2.0), (0, 1, 3.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 5.0);
    }

    #[test]
    fn products_match_dense() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.5)])
            .unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(m.matmul_dense(x.view()).unwrap(), m.to_dense().dot(&x));
        let y = array![[1.0], [2.0]];
        assert_eq!(
            m.transpose_matmul_dense(y.view()).unwrap(),
            m.to_dense().t().dot(&y)
        );
        assert!(m.matmul_dense(y.view()).is_err());
    }
}
