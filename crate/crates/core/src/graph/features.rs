use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-dimension `(min, max)` bounds of the clean features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureRange<T> {
    bounds: Vec<(T, T)>,
}

impl<T: Scalar> FeatureRange<T> {
    pub fn new(bounds: Vec<(T, T)>) -> Result<Self> {
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Validation(format!(
                    "feature range of dimension {d} is [{lo}, {hi}]"
                )));
            }
        }
        Ok(FeatureRange { bounds })
    }

    /// Uniform bounds `[lo, hi]` over `dims` dimensions.
    pub fn uniform(dims: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![(lo, hi); dims])
    }

    /// Column-wise min and max. An empty matrix yields `(0, 0)` bounds.
    pub fn from_features(x: ArrayView2<T>) -> Self {
        let bounds = x
            .columns()
            .into_iter()
            .map(|col| {
                col.iter().fold(None, |acc: Option<(T, T)>, &v| match acc {
                    None => Some((v, v)),
                    Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
                })
                .unwrap_or((T::zero(), T::zero()))
            })
            .collect();
        FeatureRange { bounds }
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: ArrayView2<T>) -> bool {
        x.ncols() == self.dims()
            && x.rows().into_iter().all(|row| {
                row.iter()
                    .zip(&self.bounds)
                    .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
            })
    }
}

/// Elementwise clamp of every row into the per-dimension bounds.
pub fn clamp_features<T: Scalar>(x: ArrayView2<T>, range: &FeatureRange<T>) -> Result<Array2<T>> {
    Ok(clamp_with_mask(x, range)?.0)
}

/// Clamped matrix plus a mask that is 1 where the input was strictly inside
/// its bounds (the derivative of the clamp) and 0 where it was clipped.
pub(crate) fn clamp_with_mask<T: Scalar>(
    x: ArrayView2<T>,
    range: &FeatureRange<T>,
) -> Result<(Array2<T>, Array2<T>)> {
    if x.ncols() != range.dims() {
        return Err(Error::Dimension(format!(
            "{} feature columns against a {}-dimensional range",
            x.ncols(),
            range.dims()
        )));
    }
    let mut out = x.to_owned();
    let mut mask = Array2::ones(x.raw_dim());
    for ((i, d), v) in out.indexed_iter_mut() {
        let (lo, hi) = range.bounds[d];
        if *v < lo {
            *v = lo;
            mask[[i, d]] = T::zero();
        } else if *v > hi {
            *v = hi;
            mask[[i, d]] = T::zero();
        }
    }
    Ok((out, mask))
}
