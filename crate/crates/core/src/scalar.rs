//! Floating-point scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point: f32 or f64.
///
/// Besides the arithmetic, each scalar carries the default tolerances used
/// by the KL inversion, since a bracket width of `1e-12` is meaningful for
/// `f64` but far below the resolution of `f32`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Default bracket width at which bisection may stop.
    fn default_inversion_tol() -> Self;

    /// Default allowed excess of `kl(q, u)` over the slack at the returned bound.
    fn default_roundtrip_tol() -> Self;

    /// Lossless-enough conversion from a literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal is representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }
}

impl Scalar for f64 {
    #[inline]
    fn default_inversion_tol() -> Self {
        1e-12
    }

    #[inline]
    fn default_roundtrip_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    #[inline]
    fn default_inversion_tol() -> Self {
        1e-6
    }

    #[inline]
    fn default_roundtrip_tol() -> Self {
        1e-4
    }
}
