//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the game, noise, estimator and theory code is generic over.
///
/// Implemented for `f32` and `f64`. `Display`/`FromStr` are required so games
/// and datasets round-trip through their text formats.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// KKT residual threshold used by [`crate::estimator::SolverConfig::default`].
    const DEFAULT_KKT_TOL: f64;

    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Scalar for f32 {
    const DEFAULT_KKT_TOL: f64 = 1e-4;
}

impl Scalar for f64 {
    const DEFAULT_KKT_TOL: f64 = 1e-7;
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + exp(-x))`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `1 / (exp(x/2) + exp(-x/2))^2`, the curvature of the logistic loss.
#[inline]
pub fn eta<T: Scalar>(x: T) -> T {
    let e = (-x.abs()).exp();
    let d = T::one() + e;
    e / (d * d)
}
