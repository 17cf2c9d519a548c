//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar the whole pipeline is generic over.
///
/// Implemented for `f32` and `f64`. Every algorithm in the crate is written
/// against this trait; the concrete aliases at the crate root fix it to `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Sum + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the supported float types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + LowerExp
        + Sum
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Relative tolerances used by the algebraic kernel and the reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Rank threshold, relative to the largest column norm.
    pub rank: T,
    /// Orthonormality of rotations.
    pub orth: T,
    /// Symmetry checks, relative to the matrix norm.
    pub sym: T,
    /// Eigenvalue sign threshold, relative to the matrix norm.
    pub eig: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        // Never tighter than a few hundred ulps of the working precision.
        let floor = T::epsilon() * T::lit(100.0);
        Self {
            rank: T::lit(1e-10).max(floor),
            orth: T::lit(1e-12).max(floor),
            sym: T::lit(1e-10).max(floor),
            eig: T::lit(1e-10).max(floor),
        }
    }
}
