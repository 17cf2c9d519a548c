use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// LU factorisation with partial pivoting, `P·A = L·U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    packed: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("LU of a {}x{} matrix", a.rows(), a.cols())));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().partial_cmp(&lu[(j, k)].abs()).unwrap())
                .unwrap();
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            if pivot == T::zero() {
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Ok(Self { packed: lu, perm, sign })
    }

    pub fn determinant(&self) -> T {
        (0..self.packed.rows()).fold(self.sign, |d, i| d * self.packed[(i, i)])
    }

    pub fn is_singular(&self) -> bool {
        (0..self.packed.rows()).any(|i| self.packed[(i, i)] == T::zero())
    }

    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.packed.rows();
        if b.len() != n {
            return Err(Error::Dimension(format!("right-hand side of length {} for order {n}", b.len())));
        }
        if self.is_singular() {
            return Err(Error::Precondition("singular matrix".into()));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.packed[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.packed[(i, j)] * x[j];
            }
            x[i] = x[i] / self.packed[(i, i)];
        }
        Ok(x)
    }

    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j))?;
            for (i, x) in col.into_iter().enumerate() {
                out[(i, j)] = x;
            }
        }
        Ok(out)
    }
}

pub fn determinant<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if a.rows() == 0 && a.cols() == 0 {
        return Ok(T::one());
    }
    Ok(Lu::new(a)?.determinant())
}

/// Solves `A·X = B`.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    Lu::new(a)?.solve(b)
}

pub fn inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    solve(a, &Matrix::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_of_permuted_diagonal() {
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[0.0, 2.0, 0.0], &[3.0, 0.0, 0.0], &[0.0, 0.0, 5.0]]);
        assert!((determinant(&a).unwrap() + 30.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).max_abs_diff(&Matrix::identity(3)) < 1e-14);
    }

    #[test]
    fn singular_solve_is_an_error() {
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(solve(&a, &Matrix::identity(2)).is_err());
        assert_eq!(determinant(&a).unwrap(), 0.0);
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(Lu::new(&Matrix::<f64>::zeros(2, 3)), Err(Error::Dimension(_))));
    }
}
