use super::{dot, norm2, normalize_sign, Matrix, Vector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Householder QR with column pivoting: `A·P = Q·R`.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    /// Full orthogonal factor, `rows × rows`.
    pub q: Matrix<T>,
    /// Upper-trapezoidal factor, same shape as the input.
    pub r: Matrix<T>,
    /// `perm[k]` is the input column moved to position `k`.
    pub perm: Vec<usize>,
    /// Largest column norm of the input; the rank threshold scales with it.
    pub max_col_norm: T,
}

impl<T: Scalar> PivotedQr<T> {
    /// Numerical rank: diagonal entries of `R` above `tol · max_col_norm`.
    pub fn rank(&self, tol: T) -> usize {
        let threshold = tol * self.max_col_norm;
        let k = self.r.rows().min(self.r.cols());
        (0..k).take_while(|&i| self.r[(i, i)].abs() > threshold).count()
    }
}

pub fn qr_column_pivoted<T: Scalar>(a: &Matrix<T>) -> PivotedQr<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut q = Matrix::identity(m);
    let mut perm: Vec<usize> = (0..n).collect();
    let max_col_norm = (0..n).map(|j| norm2(&a.column(j))).fold(T::zero(), T::max);

    for k in 0..m.min(n) {
        // pivot on the largest remaining column norm; ties keep the lower index
        let tail_norm = |r: &Matrix<T>, j: usize| (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<T>();
        let mut p = k;
        for j in k + 1..n {
            if tail_norm(&r, j) > tail_norm(&r, p) {
                p = j;
            }
        }
        if p != k {
            for i in 0..m {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = tmp;
            }
            perm.swap(k, p);
        }

        let x: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm == T::zero() {
            continue;
        }
        let alpha = if x[0] > T::zero() { -xnorm } else { xnorm };
        let mut v = x;
        v[0] = v[0] - alpha;
        let vnorm_sq = dot(&v, &v);
        if vnorm_sq == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for j in k..n {
            let s = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * r[(i, j)]) * two / vnorm_sq;
            for i in k..m {
                r[(i, j)] = r[(i, j)] - s * v[i - k];
            }
        }
        for i in k + 1..m {
            r[(i, k)] = T::zero();
        }
        // Q ← Q·H
        for i in 0..m {
            let s = (k..m).fold(T::zero(), |acc, l| acc + q[(i, l)] * v[l - k]) * two / vnorm_sq;
            for l in k..m {
                q[(i, l)] = q[(i, l)] - s * v[l - k];
            }
        }
    }

    PivotedQr { q, r, perm, max_col_norm }
}

/// Rank together with orthonormal bases of the right and left null spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaces<T> {
    pub rank: usize,
    /// Orthonormal `z` with `M·z ≈ 0`.
    pub right: Vec<Vector<T>>,
    /// Orthonormal `z̃` with `z̃·M ≈ 0`.
    pub left: Vec<Vector<T>>,
}

/// Computes rank and null spaces of a square matrix.
///
/// The right null space is the orthogonal complement of the column space of
/// `Mᵀ`, read off the trailing columns of the pivoted QR of `Mᵀ`; the left
/// null space likewise from the QR of `M`. Each basis vector has its leading
/// largest component made positive so results are reproducible.
pub fn rank_and_nullspaces<T: Scalar>(m: &Matrix<T>, tol: T) -> Result<NullSpaces<T>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "null spaces need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if tol <= T::zero() {
        return Err(Error::Precondition("rank tolerance must be positive".into()));
    }
    let n = m.rows();
    let qr_t = qr_column_pivoted(&m.transpose());
    let rank = qr_t.rank(tol);
    let qr = qr_column_pivoted(m);

    let trailing = |q: &Matrix<T>| -> Vec<Vector<T>> {
        (rank..n)
            .map(|j| {
                let mut v = q.column(j);
                normalize_sign(&mut v);
                v
            })
            .collect()
    };
    Ok(NullSpaces {
        rank,
        right: trailing(&qr_t.q),
        left: trailing(&qr.q),
    })
}

/// Extends orthonormal rows `vs` to a full orthogonal `dim × dim` matrix.
///
/// Completion rows come from the standard basis vectors in index order,
/// orthogonalised against everything accepted so far; candidates that are
/// nearly dependent are skipped.
pub fn orthonormal_complete<T: Scalar>(vs: &[Vector<T>], dim: usize, tol: T) -> Result<Matrix<T>> {
    if vs.len() > dim {
        return Err(Error::Precondition(format!("{} vectors cannot be orthonormal in dimension {dim}", vs.len())));
    }
    for (i, a) in vs.iter().enumerate() {
        if a.len() != dim {
            return Err(Error::Dimension(format!("vector {i} has length {}, expected {dim}", a.len())));
        }
        for (j, b) in vs.iter().enumerate().skip(i) {
            let expected = if i == j { T::one() } else { T::zero() };
            if (dot(a, b) - expected).abs() > tol {
                return Err(Error::Precondition(format!("input vectors {i} and {j} are not orthonormal")));
            }
        }
    }

    let floor = T::epsilon().sqrt() * T::lit(100.0);
    let mut basis: Vec<Vector<T>> = vs.to_vec();
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut r: Vector<T> = (0..dim).map(|i| if i == e { T::one() } else { T::zero() }).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &r);
                r.iter_mut().zip(b).for_each(|(x, &y)| *x = *x - c * y);
            }
        }
        let rn = norm2(&r);
        if rn <= floor {
            continue;
        }
        basis.push(r.into_iter().map(|x| x / rn).collect());
    }
    Matrix::from_rows(&basis)
}
