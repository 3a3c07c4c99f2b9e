//! Floating-point abstraction: the whole pipeline is generic over `Scalar`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating point: f32 or f64.
pub trait Scalar: Float + FromPrimitive + Display + Debug + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts a count to a scalar; counts at the scales this crate handles are
/// always representable.
pub(crate) fn count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("count fits in the scalar type")
}
