use crate::error::{Error, Result};
use crate::linalg::{dot, SymmetricMatrix};

/// `n × d` covariate matrix, row-major, with the cached maximum row norm.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    xi: f64,
    all_zero: bool,
}

impl CovariateMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("covariate matrix has no rows".into()));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("covariates must be finite".into()));
        }
        let max_sq = data
            .chunks(d.max(1))
            .take(n)
            .map(|r| if d == 0 { 0.0 } else { dot(r, r) })
            .fold(0.0_f64, f64::max);
        let all_zero = max_sq == 0.0;
        let xi = if all_zero { 1.0 } else { max_sq.sqrt() };
        Ok(Self {
            n,
            d,
            data,
            xi,
            all_zero,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    /// `n` units with no covariates at all.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, 0, Vec::new())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Maximum row norm, or 1 when every row is zero.
    #[inline]
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn is_all_zero(&self) -> bool {
        self.all_zero
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `XᵀX`
    pub fn gram(&self) -> SymmetricMatrix {
        let mut g = vec![0.0; self.d * self.d];
        for i in 0..self.n {
            let r = self.row(i);
            for p in 0..self.d {
                let rp = r[p];
                if rp == 0.0 {
                    continue;
                }
                for q in 0..=p {
                    g[p * self.d + q] += rp * r[q];
                }
            }
        }
        SymmetricMatrix::from_fn(self.d, |p, q| g[p * self.d + q])
    }

    /// `Xᵀ v`
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.d];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, x) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * x;
                }
            }
        }
        out
    }

    /// `X β`
    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.d);
        (0..self.n).map(|i| dot(self.row(i), beta)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let ones = vec![1.0 / self.n as f64; self.n];
        self.transpose_mul(&ones)
    }

    /// `Σ ‖x_i‖²`
    pub fn squared_frobenius(&self) -> f64 {
        dot(&self.data, &self.data)
    }
}
