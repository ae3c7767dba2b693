//! The floating-point abstraction every numerical routine in this crate is
//! generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Real scalar usable by the matrix, FFT and SVD code.
///
/// Implemented for `f32` and `f64`. File formats and the experiment harness
/// always work in `f64`; the `f32` instantiation exists for memory-bound
/// callers that accept the reduced accuracy.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon as used by the Jacobi sweeps.
    const EPS: Self;

    /// Lossy conversion from an `f64` literal or config value.
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
