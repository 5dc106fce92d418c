//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the model, the exact distributions and the simulator
/// are generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; literals in the crate are written as `f64`.
    fn lit(x: f64) -> Self;

    /// Conversion of a count (slot, frame or delivery number).
    fn count(n: u64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn count(n: u64) -> Self {
                n as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Sum in ascending index order. All probability masses are accumulated
/// through this so results are reproducible on a given platform.
#[inline]
pub(crate) fn ordered_sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    let mut acc = T::zero();
    for x in xs {
        acc += x;
    }
    acc
}
