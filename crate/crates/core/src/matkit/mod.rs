//! Dense real linear algebra for small square matrices.
//!
//! Everything here is sized for the systems this crate handles (a handful of
//! unknowns, at most 16), so the routines favour clarity and determinism over
//! blocking or vectorisation. All operations are pure.

mod dense;
mod eigen;
mod lu;
mod qr;

pub use dense::{Matrix, Vector};
pub use eigen::{classify_definiteness, spectral_radius, symmetric_eigen, Definiteness, DefinitenessClass};
pub use lu::{determinant, inverse, solve, Lu};
pub use qr::{orthonormal_complete, qr_column_pivoted, rank_and_nullspaces, NullSpaces, PivotedQr};

use crate::scalar::Scalar;

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Flips `v` so that its first component of largest magnitude is positive.
pub(crate) fn normalize_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        // strict comparison keeps the first of equal magnitudes
        if x.abs() > v[best].abs() + T::epsilon() * v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
