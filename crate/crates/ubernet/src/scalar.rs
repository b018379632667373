//! Floating-point abstraction for the numeric kernels.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar element type for tensors, network parameters, and losses.
///
/// Implemented for `f32` and `f64`. The trait bundles the `num-traits`
/// capabilities the kernels rely on plus conversion helpers so generic code
/// can mix literals and panel data (which is always `f64`) without friction.
pub trait Scalar:
    Float
    + NumAssignOps
    + Sum<Self>
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, panicking only on values unrepresentable in any
    /// float type (never happens for finite inputs).
    fn of(v: f64) -> Self {
        Self::from(v).expect("f64 value not representable in scalar type")
    }

    /// Converts to `f64` (lossless for both supported types).
    fn to64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

macro_rules! scalar_impl {
    ($($t:ty)*) => {$(
        impl Scalar for $t {}
    )*};
}

scalar_impl!(f32 f64);
