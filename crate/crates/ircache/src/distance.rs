//! Euclidean distance over encodings, accumulated in f64.

use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// sqrt(sum_i (a_i - b_i)^2). Errors on dimension mismatch.
pub fn euclidean_distance<S: Scalar>(a: &Encoding<S>, b: &Encoding<S>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(squared_distance(a.values(), b.values()).sqrt())
}

/// Squared distance over raw slices; callers must have checked dimensions.
pub(crate) fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x.as_f64() - y.as_f64();
        acc += d * d;
    }
    acc
}
