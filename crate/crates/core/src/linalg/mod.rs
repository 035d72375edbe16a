//! Dense linear algebra used by the sampler, the estimators and the
//! diagnostics: symmetric storage, Cholesky factorization with rank-1
//! update/downdate, and a cyclic Jacobi eigensolver.

mod cholesky;
mod dense;
mod eigen;

pub use cholesky::{chol_downdate, chol_solve, chol_update, cholesky_factor, CholeskyFactor};
pub use dense::{dot, lu_solve};
pub use eigen::{sym_eigen, Spectrum};

use thiserror::Error;

/// Relative pivot tolerance used for positive-definiteness checks.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rank-1 downdate would destroy positive definiteness at index {index}")]
    DowndateBreaksPD { index: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("linear system is singular")]
    Singular,
}

/// Square symmetric matrix stored densely in row-major order. Writes go
/// through [`SymmetricMatrix::set`], which mirrors the entry, so the two
/// triangles never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.data[i * order + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds from a full row-major buffer, averaging the two triangles.
    pub fn from_full(order: usize, full: &[f64]) -> Result<Self, LinalgError> {
        if full.len() != order * order {
            return Err(LinalgError::DimensionMismatch {
                expected: order * order,
                found: full.len(),
            });
        }
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..=i {
                let v = 0.5 * (full[i * order + j] + full[j * order + i]);
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Builds from a closure evaluated on the lower triangle.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    /// Full row-major view.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// `self - v vᵀ`
    pub fn sub_outer(&self, v: &[f64]) -> Self {
        Self::from_fn(self.order, |i, j| self.get(i, j) - v[i] * v[j])
    }

    /// `self + v vᵀ`
    pub fn add_outer(&self, v: &[f64]) -> Self {
        Self::from_fn(self.order, |i, j| self.get(i, j) + v[i] * v[j])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.order, other.order);
        Self {
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Congruence `Aᵀ · self · A` where `a` is `order × cols`, row-major.
    pub fn congruence(&self, a: &[f64], cols: usize) -> Self {
        let n = self.order;
        assert_eq!(a.len(), n * cols);
        // t = self · A  (n × cols)
        let mut t = vec![0.0; n * cols];
        for i in 0..n {
            let row = self.row(i);
            let ti = &mut t[i * cols..(i + 1) * cols];
            for (k, &s) in row.iter().enumerate() {
                if s != 0.0 {
                    let ak = &a[k * cols..(k + 1) * cols];
                    for (tv, av) in ti.iter_mut().zip(ak) {
                        *tv += s * av;
                    }
                }
            }
        }
        Self::from_fn(cols, |p, q| (0..n).map(|k| a[k * cols + p] * t[k * cols + q]).sum())
    }
}
