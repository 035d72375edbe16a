use crate::covariates::CovariateMatrix;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Eigenvalues of the centered Gram matrix below this fraction of the
/// largest are treated as exact collinearity.
pub const WHITEN_DROP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    #[default]
    None,
    Center,
    Whiten,
}

impl FromStr for Preprocessing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "center" => Ok(Self::Center),
            "whiten" => Ok(Self::Whiten),
            other => Err(format!("unknown preprocessing mode {other:?}")),
        }
    }
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Center => "center",
            Self::Whiten => "whiten",
        })
    }
}

fn centered(x: &CovariateMatrix) -> Vec<f64> {
    let d = x.d();
    let means = x.column_means();
    x.as_slice().iter().enumerate().map(|(k, v)| v - means[k % d]).collect()
}

/// Centers columns, and for `Whiten` rotates and rescales the retained
/// directions so that `XᵀX = n·I`.
pub fn preprocess(x: &CovariateMatrix, mode: Preprocessing) -> Result<CovariateMatrix> {
    let (n, d) = (x.n(), x.d());
    if mode == Preprocessing::None || d == 0 {
        return Ok(x.clone());
    }
    let xc = CovariateMatrix::new(n, d, centered(x))?;
    if mode == Preprocessing::Center {
        return Ok(xc);
    }
    let spec = sym_eigen(&xc.gram())?;
    let top = spec.max();
    let keep: Vec<usize> = (0..d)
        .filter(|&k| top > 0.0 && spec.eigenvalues[k] >= WHITEN_DROP_TOL * top)
        .collect();
    if keep.is_empty() {
        return Err(Error::DegenerateCovariates);
    }
    // Column k of W is v_k·sqrt(n/λ_k).
    let w: Vec<Vec<f64>> = keep
        .iter()
        .map(|&k| {
            let s = (n as f64 / spec.eigenvalues[k]).sqrt();
            spec.vector(k).into_iter().map(|v| v * s).collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * keep.len());
    for i in 0..n {
        let row = xc.row(i);
        for col in &w {
            data.push(row.iter().zip(col).map(|(a, b)| a * b).sum());
        }
    }
    CovariateMatrix::new(n, keep.len(), data)
}
