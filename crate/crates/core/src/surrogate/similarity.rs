use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cosine similarity. Zero-norm inputs have similarity 0.
pub fn cosine_sim<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "cosine of vectors with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(cosine(x, y))
}

pub(crate) fn cosine<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> T {
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    if nx == T::zero() || ny == T::zero() {
        return T::zero();
    }
    let s = x.dot(&y) / (nx * ny);
    s.max(-T::one()).min(T::one())
}

/// Gradient of `cosine(x, y)` with respect to `x`; zero when either norm is 0.
pub(crate) fn cosine_grad<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>) -> Array1<T> {
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    if nx == T::zero() || ny == T::zero() {
        return Array1::zeros(x.len());
    }
    let s = x.dot(&y) / (nx * ny);
    let inv = T::one() / (nx * ny);
    let scale = s / (nx * nx);
    Array1::from_shape_fn(x.len(), |k| y[k] * inv - x[k] * scale)
}
