use std::fmt;

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sign pattern of a symmetric matrix's spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemi,
    NegativeDefinite,
    NegativeSemi,
    Indefinite,
    Zero,
}

impl Definiteness {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PositiveDefinite => "POSITIVE_DEFINITE",
            Self::PositiveSemi => "POSITIVE_SEMI",
            Self::NegativeDefinite => "NEGATIVE_DEFINITE",
            Self::NegativeSemi => "NEGATIVE_SEMI",
            Self::Indefinite => "INDEFINITE",
            Self::Zero => "ZERO",
        }
    }

    /// `M ≥ 0`.
    pub fn is_non_negative(self) -> bool {
        matches!(self, Self::PositiveDefinite | Self::PositiveSemi | Self::Zero)
    }

    /// `M ≤ 0`.
    pub fn is_non_positive(self) -> bool {
        matches!(self, Self::NegativeDefinite | Self::NegativeSemi | Self::Zero)
    }
}

impl fmt::Display for Definiteness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessClass<T> {
    pub tag: Definiteness,
    /// Ascending.
    pub eigenvalues: Vec<T>,
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns ascending eigenvalues and the matching orthonormal eigenvectors as
/// the columns of the second matrix. Only the symmetric part of the input is
/// used.
pub fn symmetric_eigen<T: Scalar>(m: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenproblem on a {}x{} matrix", m.rows(), m.cols())));
    }
    let n = m.rows();
    let mut a = m.symmetric_part();
    let mut v = Matrix::identity(n);
    let scale = a.norm();
    let two = T::lit(2.0);

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    Ok((values, v.select_cols(&order)))
}

/// Classifies a symmetric matrix by the signs of its eigenvalues.
///
/// An eigenvalue counts as zero when its magnitude is at most `tol · ‖M‖`
/// (Frobenius). The same relative tolerance bounds the admissible asymmetry.
pub fn classify_definiteness<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<DefinitenessClass<T>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("definiteness of a {}x{} matrix", m.rows(), m.cols())));
    }
    let norm = m.norm();
    if m.asymmetry() > tol * norm {
        return Err(Error::Precondition(format!(
            "matrix is not symmetric (asymmetry {:e})",
            m.asymmetry().as_f64()
        )));
    }
    let (eigenvalues, _) = symmetric_eigen(m)?;
    let threshold = tol * norm;
    let pos = eigenvalues.iter().filter(|&&l| l > threshold).count();
    let neg = eigenvalues.iter().filter(|&&l| l < -threshold).count();
    let n = eigenvalues.len();
    let tag = match (pos, neg) {
        (0, 0) => Definiteness::Zero,
        (p, 0) if p == n => Definiteness::PositiveDefinite,
        (_, 0) => Definiteness::PositiveSemi,
        (0, q) if q == n => Definiteness::NegativeDefinite,
        (0, _) => Definiteness::NegativeSemi,
        _ => Definiteness::Indefinite,
    };
    Ok(DefinitenessClass { tag, eigenvalues })
}

/// Spectral radius of a square matrix.
///
/// Symmetric input goes through the eigen-decomposition; otherwise Gelfand's
/// formula `ρ = lim ‖A^k‖^{1/k}` is evaluated along `k = 2^j` by repeated
/// squaring with renormalisation.
pub fn spectral_radius<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("spectral radius of a {}x{} matrix", a.rows(), a.cols())));
    }
    if a.asymmetry() <= T::epsilon() * a.norm() {
        let (vals, _) = symmetric_eigen(a)?;
        return Ok(vals.iter().fold(T::zero(), |m, x| m.max(x.abs())));
    }
    let s0 = a.norm();
    if s0 == T::zero() {
        return Ok(T::zero());
    }
    let mut b = a.scale(s0.recip());
    let mut log_norm = s0.ln();
    let mut power = T::one();
    for _ in 0..48 {
        b = &b * &b;
        power = power * T::lit(2.0);
        let s = b.norm();
        if s == T::zero() {
            return Ok(T::zero());
        }
        b = b.scale(s.recip());
        log_norm = log_norm * T::lit(2.0) + s.ln();
    }
    Ok((log_norm / power).exp())
}
