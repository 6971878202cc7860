//! Scalar abstraction for the encoding element type.

use num_traits::Float;

/// Element type of an encoding vector. Distances are always accumulated in
/// `f64` regardless of the storage scalar.
pub trait Scalar: Float + Copy + Send + Sync + std::fmt::Debug + 'static {
    fn as_f64(self) -> f64;
    fn of_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn of_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn of_f64(v: f64) -> Self {
        v
    }
}
