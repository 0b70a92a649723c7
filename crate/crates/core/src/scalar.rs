//! Floating-point abstraction shared by every numeric routine in the crate.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real scalar the solver is generic over (`f32` or `f64`).
///
/// Besides the usual float operations every implementation carries the
/// tolerances used to decide when two kinks coincide or when two slopes are
/// equal. They are tuned per precision: `1e-12` for `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Relative tolerance for slope comparisons and kink merging.
    fn rel_tol() -> Self;

    /// Converts an `f64` literal; panics only if the value is not representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("count not representable")
    }

    /// `rel_tol() * max(1, |x|)`, the absolute merge distance around `x`.
    #[inline]
    fn merge_tol(x: Self) -> Self {
        Self::rel_tol() * x.abs().max(Self::one())
    }

    /// True when `a` and `b` agree to `rel_tol()` relative to the larger magnitude.
    #[inline]
    fn near(a: Self, b: Self) -> bool {
        (a - b).abs() <= Self::rel_tol() * a.abs().max(b.abs())
    }
}

impl Scalar for f64 {
    #[inline]
    fn rel_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn rel_tol() -> Self {
        2e-6
    }
}
