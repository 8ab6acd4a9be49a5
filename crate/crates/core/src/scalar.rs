//! Scalar abstraction for the numeric kernels.
//!
//! Cost construction and the transport solvers are generic over [`Scalar`] so
//! the same code runs in `f64` (the default everywhere) and in `f32` where a
//! large instance would not fit in memory otherwise. Statistical layers stay
//! concrete in [`crate::Real`].

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable by the numeric kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and tolerances.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in this scalar type")
    }

    /// Widening conversion for accumulation and reporting.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Scalar>(values: &[f64]) -> f64 {
        values.iter().map(|&v| T::from_f64_c(v)).sum::<T>().to_f64_c()
    }

    #[test]
    fn both_widths_instantiate() {
        let vals = [0.25, 0.5, 0.125];
        assert_eq!(sum_generic::<f64>(&vals), 0.875);
        assert_eq!(sum_generic::<f32>(&vals), 0.875);
    }
}
