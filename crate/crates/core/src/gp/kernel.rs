use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Stationary covariance families with ARD length-scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Matern32,
    Matern52,
}

impl KernelFamily {
    /// Correlation as a function of the scaled distance `r`.
    #[inline]
    pub fn correlation<T: Scalar>(self, r: T) -> T {
        match self {
            KernelFamily::SquaredExponential => (-T::lit(0.5) * r * r).exp(),
            KernelFamily::Matern32 => {
                let s = T::lit(3f64.sqrt()) * r;
                (T::one() + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = T::lit(5f64.sqrt()) * r;
                (T::one() + s + s * s / T::lit(3.0)) * (-s).exp()
            }
        }
    }
}

/// `k(x, x') = output_scale * rho(|x - x'|_ell)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel<T> {
    pub family: KernelFamily,
    /// Signal variance.
    pub output_scale: T,
    pub length_scales: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(family: KernelFamily, output_scale: T, length_scales: Vec<T>) -> Result<Self> {
        let k = Self { family, output_scale, length_scales };
        k.validate()?;
        Ok(k)
    }

    /// Same length-scale in every dimension.
    pub fn isotropic(family: KernelFamily, output_scale: T, length_scale: T, dim: usize) -> Result<Self> {
        Self::new(family, output_scale, vec![length_scale; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.output_scale > T::zero()) || !self.output_scale.is_finite() {
            return Err(Error::InvalidParameter(format!("output_scale must be positive, got {}", self.output_scale)));
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidParameter("kernel needs at least one length-scale".into()));
        }
        if let Some(l) = self.length_scales.iter().find(|l| !(**l > T::zero()) || !l.is_finite()) {
            return Err(Error::InvalidParameter(format!("length-scales must be positive, got {l}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Distance after dividing each coordinate by its length-scale.
    #[inline]
    pub fn scaled_distance(&self, a: &[T], b: &[T]) -> T {
        let mut s = T::zero();
        for ((&x, &y), &l) in a.iter().zip(b).zip(&self.length_scales) {
            let d = (x - y) / l;
            s += d * d;
        }
        s.sqrt()
    }

    #[inline]
    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        self.output_scale * self.family.correlation(self.scaled_distance(a, b))
    }

    /// `k(a_i, b_j)` for every pair of rows.
    pub fn cross(&self, a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(a.nrows(), b.nrows());
        for i in 0..a.nrows() {
            let ai = a.row(i);
            for j in 0..b.nrows() {
                out[(i, j)] = self.eval(ai, b.row(j));
            }
        }
        out
    }

    /// `k(x_i, theta)` for every row of `x`.
    pub fn column(&self, x: &Matrix<T>, theta: &[T]) -> Vec<T> {
        x.rows().map(|r| self.eval(r, theta)).collect()
    }
}

/// Gram matrix of `kernel` on the rows of `x`: symmetric, diagonal equal to the output scale.
pub fn gram<T: Scalar>(kernel: &Kernel<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    kernel.validate()?;
    if x.ncols() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), found: x.ncols() });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("gram input locations"));
    }
    let n = x.nrows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = kernel.output_scale;
        for j in 0..i {
            let v = kernel.eval(x.row(i), x.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}
