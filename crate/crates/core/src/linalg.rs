//! Small dense symmetric matrices and a cyclic Jacobi eigenvalue solver.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `self += scale * z z^T`
    #[inline]
    pub fn add_outer(&mut self, scale: T, z: &[T]) {
        debug_assert_eq!(z.len(), self.n);
        for (a, &za) in z.iter().enumerate() {
            let s = scale * za;
            let row = &mut self.data[a * self.n..(a + 1) * self.n];
            for (dst, &zb) in row.iter_mut().zip(z) {
                *dst = *dst + s * zb;
            }
        }
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.data {
            *v = *v * c;
        }
    }

    /// Principal submatrix on `idx`.
    pub fn select(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut out = Self::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * k + b] = self[(i, j)];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Eigenvalues of a symmetric matrix in ascending order.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        jacobi_eigenvalues(self)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible relative
/// to the matrix norm. Only the upper triangle is read.
fn jacobi_eigenvalues<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let n = m.n;
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let frob: T = a.data.iter().map(|&v| v * v).sum::<T>().sqrt();
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum::<T>()
            .sqrt();
        if off <= eps * frob || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
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
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    ev
}
