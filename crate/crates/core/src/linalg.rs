//! Small dense linear algebra: a row-major matrix and a jittered Cholesky factorization.
//!
//! Everything here is sized for GP work with at most a few hundred observations, so the
//! routines are plain loops over contiguous rows.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Sets of points are stored one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice yields a `0 x cols` matrix.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[T]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: row.len() });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok(self.rows().map(|r| dot(r, v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Jitter schedule for [`Cholesky::factor_jittered`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterPolicy {
    /// Initial diagonal jitter relative to the matrix scale.
    pub relative: f64,
    /// How many times the jitter may be doubled before giving up.
    pub max_doublings: u32,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { relative: 1e-10, max_doublings: 20 }
    }
}

/// Lower-triangular factor `L` with `A + jitter * I = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
    jitter: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Plain factorization without added jitter.
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        match try_cholesky(a, T::zero()) {
            Some(l) => Ok(Self { l, jitter: T::zero() }),
            None => {
                Err(Error::NotPositiveDefinite { jitter: 0.0, condition_estimate: condition_estimate(a, T::zero()) })
            }
        }
    }

    /// Factors `a + jitter * I`, starting from `policy.relative * scale` and doubling on
    /// failure. `scale` is usually the kernel output scale.
    pub fn factor_jittered(a: &Matrix<T>, scale: T, policy: JitterPolicy) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("matrix passed to Cholesky"));
        }
        let mut jitter = T::lit(policy.relative) * scale;
        for _ in 0..=policy.max_doublings {
            if let Some(l) = try_cholesky(a, jitter) {
                return Ok(Self { l, jitter });
            }
            jitter *= T::lit(2.0);
        }
        let last = jitter / T::lit(2.0);
        Err(Error::NotPositiveDefinite { jitter: last.to_f64_lossy(), condition_estimate: condition_estimate(a, last) })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Diagonal jitter that was actually added.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| two * self.l[(i, i)].ln()).sum()
    }
}

fn try_cholesky<T: Scalar>(a: &Matrix<T>, jitter: T) -> Option<Matrix<T>> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let (_, tail) = l.data.split_at_mut(j * n);
        let (lj, below) = tail.split_at_mut(n);
        let mut d = a[(j, j)] + jitter - dot(&lj[..j], &lj[..j]);
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        d = d.sqrt();
        lj[j] = d;
        let lj = &lj[..j];
        for i in j + 1..n {
            let row = &mut below[(i - j - 1) * n..(i - j) * n];
            let s = a[(i, j)] - dot(&row[..j], lj);
            row[j] = s / d;
        }
    }
    Some(l)
}

/// Cheap condition-number estimate: Gershgorin bound on the largest eigenvalue over the
/// smallest diagonal entry (or the jitter, whichever is larger).
fn condition_estimate<T: Scalar>(a: &Matrix<T>, jitter: T) -> f64 {
    let n = a.nrows();
    let mut max_row = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for i in 0..n {
        let r: f64 = a.row(i).iter().map(|x| x.to_f64_lossy().abs()).sum();
        max_row = max_row.max(r);
        min_diag = min_diag.min(a[(i, i)].to_f64_lossy());
    }
    let floor = min_diag.max(jitter.to_f64_lossy());
    if floor > 0.0 {
        max_row / floor
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd3() -> Matrix<f64> {
        Matrix::from_rows(&[[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]], 3).unwrap()
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd3();
        let c = Cholesky::factor(&a).unwrap();
        let l = c.lower();
        let llt = l.matmul(&l.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(llt[(i, j)], a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn solve_matches_product() {
        let a = spd3();
        let c = Cholesky::factor(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let back = a.mat_vec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
        let det: f64 = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.6) + 0.6 * (2.0 - 5.0 * 0.6);
        assert_relative_eq!(c.log_det(), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_needs_jitter() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]], 2).unwrap();
        assert!(Cholesky::factor(&a).is_err());
        let c = Cholesky::factor_jittered(&a, 1.0, JitterPolicy::default()).unwrap();
        assert!(c.jitter() > 0.0);
    }

    #[test]
    fn indefinite_matrix_reports_condition() {
        let a = Matrix::from_rows(&[[1.0, 3.0], [3.0, 1.0]], 2).unwrap();
        match Cholesky::factor_jittered(&a, 1.0, JitterPolicy { relative: 1e-10, max_doublings: 3 }) {
            Err(Error::NotPositiveDefinite { condition_estimate, .. }) => assert!(condition_estimate > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
