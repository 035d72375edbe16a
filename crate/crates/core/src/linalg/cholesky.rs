use super::{LinalgError, SymmetricMatrix, PIVOT_TOL};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Stored row-major as a full square buffer; entries above the diagonal are
/// always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    order: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    /// `sqrt(s) · I`, the factor of `s · I`.
    pub fn scaled_identity(order: usize, s: f64) -> Self {
        let r = s.sqrt();
        let mut lower = vec![0.0; order * order];
        for i in 0..order {
            lower[i * order + i] = r;
        }
        Self { order, lower }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.order + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lower
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.order;
        SymmetricMatrix::from_fn(n, |i, j| {
            let (ri, rj) = (&self.lower[i * n..i * n + j + 1], &self.lower[j * n..j * n + j + 1]);
            ri.iter().zip(rj).map(|(a, b)| a * b).sum()
        })
    }

    /// `(L Lᵀ) x`, without forming the product matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order;
        // y = Lᵀ x
        let mut y = vec![0.0; n];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (i..n).map(|k| self.lower[k * n + i] * x[k]).sum();
        }
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower[i * n + k] * y[k]).sum())
            .collect()
    }

    /// Solves `(L Lᵀ) x = b` in place by forward then backward substitution.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.order;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for (k, bk) in b.iter().enumerate().skip(i + 1) {
                s -= self.lower[k * n + i] * bk;
            }
            b[i] = s / self.lower[i * n + i];
        }
        Ok(())
    }

    /// In-place rank-1 update to the factor of `L Lᵀ + v vᵀ`. `v` is used as
    /// workspace and overwritten.
    pub fn update_in_place(&mut self, v: &mut [f64]) -> Result<(), LinalgError> {
        self.rank_one(v, 1.0)
    }

    /// In-place rank-1 downdate to the factor of `L Lᵀ - v vᵀ` via hyperbolic
    /// rotations. `v` is overwritten. On error the factor is left partially
    /// modified and must be rebuilt by the caller.
    pub fn downdate_in_place(&mut self, v: &mut [f64]) -> Result<(), LinalgError> {
        self.rank_one(v, -1.0)
    }

    fn rank_one(&mut self, v: &mut [f64], sign: f64) -> Result<(), LinalgError> {
        let n = self.order;
        if v.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        for j in 0..n {
            let ljj = self.lower[j * n + j];
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            let r2 = ljj * ljj + sign * vj * vj;
            if r2 <= PIVOT_TOL * ljj * ljj {
                return Err(LinalgError::DowndateBreaksPD { index: j });
            }
            let r = r2.sqrt();
            let c = r / ljj;
            let s = vj / ljj;
            self.lower[j * n + j] = r;
            for (i, vi) in v.iter_mut().enumerate().skip(j + 1) {
                let lij = (self.lower[i * n + j] + sign * s * *vi) / c;
                self.lower[i * n + j] = lij;
                *vi = c * *vi - s * lij;
            }
        }
        Ok(())
    }
}

/// Cholesky factorization `A = L Lᵀ` in `O(order³)`.
pub fn cholesky_factor(a: &SymmetricMatrix) -> Result<CholeskyFactor, LinalgError> {
    let n = a.order();
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a.get(i, i)));
    let tol = PIVOT_TOL * max_diag;
    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        let rj = &lower[j * n..j * n + j];
        let d = a.get(j, j) - rj.iter().map(|x| x * x).sum::<f64>();
        if d.is_nan() || d <= tol {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        lower[j * n + j] = ljj;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| lower[i * n + k] * lower[j * n + k]).sum();
            lower[i * n + j] = (a.get(i, j) - s) / ljj;
        }
    }
    Ok(CholeskyFactor { order: n, lower })
}

/// Solves `(L Lᵀ) x = b`.
pub fn chol_solve(factor: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let mut x = b.to_vec();
    factor.solve_in_place(&mut x)?;
    Ok(x)
}

/// Factor of `L Lᵀ - v vᵀ`.
pub fn chol_downdate(factor: &CholeskyFactor, v: &[f64]) -> Result<CholeskyFactor, LinalgError> {
    let mut out = factor.clone();
    out.downdate_in_place(&mut v.to_vec())?;
    Ok(out)
}

/// Factor of `L Lᵀ + v vᵀ`.
pub fn chol_update(factor: &CholeskyFactor, v: &[f64]) -> Result<CholeskyFactor, LinalgError> {
    let mut out = factor.clone();
    out.update_in_place(&mut v.to_vec())?;
    Ok(out)
}
