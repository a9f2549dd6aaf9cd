//! Scalar abstraction: all analytic code is generic over the floating-point
//! type through [`Real`], so the same planner runs in `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used throughout the library (`f32` or `f64`).
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Casts an `f64` constant into the working scalar type.
///
/// Panics only if the target type cannot represent any finite `f64`, which
/// cannot happen for the two implementors above.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from(x).expect("f64 constant representable in scalar type")
}

/// Casts a unit count into the working scalar type.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from(n).expect("unit count representable in scalar type")
}
