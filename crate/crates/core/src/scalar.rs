//! Scalar abstraction for the math layer.
//!
//! The special functions, quadrature, and field kernels are generic over the
//! real scalar so they work in both `f32` and `f64`. The pipeline layers
//! (scene, solver, imaging, I/O) fix the scalar to `f64` through the aliases
//! exported at the crate root; file formats and tolerances are specified in
//! double precision.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, RemAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the generic math layer.
///
/// This is a trait alias: anything float-like with the usual constants,
/// conversions and compound assignment comes for free (`f32`, `f64`).
pub trait RealScalar:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + RemAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants baked into
    /// formulas (physical constants, empirical coefficients).
    fn from_f64_const(value: f64) -> Self {
        Self::from_f64(value).expect("constant representable in scalar type")
    }
}

impl<T> RealScalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + RemAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
