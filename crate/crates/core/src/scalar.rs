//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the kernels are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
