use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used throughout the numerical core: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for "probabilities sum to one" checks at this precision.
    fn normalization_tolerance() -> Self;

    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn normalization_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn normalization_tolerance() -> Self {
        1e-5
    }
}
