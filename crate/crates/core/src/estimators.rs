//! Horvitz–Thompson estimation, the `Q` matrix, ridge-loss quantities and
//! the conservative confidence intervals built on them.
//!
//! Second-order moments are always supplied by the caller, either exact
//! (from [`crate::oracle`]) or Monte Carlo (from [`crate::diagnostics`]).

use crate::covariates::CovariateMatrix;
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_factor, dot, SymmetricMatrix};
use crate::sampler::regularizer;
use serde::{Deserialize, Serialize};

/// Floor for pair denominators in the non-uniform estimator.
pub const NONUNIFORM_DENOM_FLOOR: f64 = 1e-12;

/// Observed outcomes with the assignment that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeData {
    pub y: Vec<f64>,
    pub z: Vec<i8>,
}

impl OutcomeData {
    pub fn new(y: Vec<f64>, z: Vec<i8>) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                found: y.len(),
            });
        }
        Ok(Self { y, z })
    }

    /// Reveals `a_i` for treated units and `b_i` for controls.
    pub fn observe(a: &[f64], b: &[f64], z: &[i8]) -> Self {
        let y = z
            .iter()
            .enumerate()
            .map(|(i, &zi)| if zi > 0 { a[i] } else { b[i] })
            .collect();
        Self { y, z: z.to_vec() }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

pub fn ht_estimate(data: &OutcomeData, probabilities: &[f64]) -> f64 {
    let n = data.n() as f64;
    let total: f64 = data
        .y
        .iter()
        .zip(&data.z)
        .zip(probabilities)
        .map(|((&y, &z), &p)| if z > 0 { y / p } else { -y / (1.0 - p) })
        .sum();
    total / n
}

/// `(ã + b̃)/2` with `ã_i = a_i/(2π_i)` and `b̃_i = b_i/(2(1−π_i))`.
/// Equals `(a + b)/2` under uniform probabilities.
pub fn normalized_potential_outcomes(a: &[f64], b: &[f64], probabilities: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .zip(probabilities)
        .map(|((&ai, &bi), &p)| 0.5 * (ai / (2.0 * p) + bi / (2.0 * (1.0 - p))))
        .collect()
}

pub fn average_treatment_effect(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64
}

/// `(φI + (1−φ)ξ⁻²XXᵀ)⁻¹`
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    pub entries: SymmetricMatrix,
    pub phi: f64,
    pub xi: f64,
}

/// Builds `Q` through one `d × d` factorization:
/// `Q_ij = φ⁻¹(1{i=j} − x_iᵀ(XᵀX + λI)⁻¹x_j)`.
pub fn compute_q(x: &CovariateMatrix, phi: f64) -> Result<QMatrix> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::InvalidConfig(format!("phi must lie in (0, 1], got {phi}")));
    }
    let n = x.n();
    if phi == 1.0 {
        return Ok(QMatrix {
            entries: SymmetricMatrix::identity(n),
            phi,
            xi: x.xi(),
        });
    }
    let lambda = regularizer(phi, x.xi());
    let mut m = x.gram();
    for i in 0..x.d() {
        m.set(i, i, m.get(i, i) + lambda);
    }
    let factor = cholesky_factor(&m)?;
    let solved: Vec<Vec<f64>> = (0..n)
        .map(|j| chol_solve(&factor, x.row(j)))
        .collect::<std::result::Result<_, _>>()?;
    let inv_phi = 1.0 / phi;
    let entries = SymmetricMatrix::from_fn(n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        inv_phi * (delta - dot(x.row(i), &solved[j]))
    });
    Ok(QMatrix {
        entries,
        phi,
        xi: x.xi(),
    })
}

/// `mᵀQm`
pub fn ridge_loss_exact(q: &QMatrix, m: &[f64]) -> f64 {
    q.entries.quad_form(m)
}

/// Minimum over `β` of `‖m − Xβ‖²/φ + ξ²‖β‖²/(1−φ)`, from the closed-form
/// minimizer. At `φ = 1` the penalty forces `β = 0`.
pub fn ridge_loss_via_regression(x: &CovariateMatrix, phi: f64, m: &[f64]) -> Result<f64> {
    if phi >= 1.0 {
        return Ok(dot(m, m));
    }
    let beta = ridge_solve(x, regularizer(phi, x.xi()), m, |_| true)?;
    let fit = x.mul(&beta);
    let resid: f64 = m.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(resid / phi + x.xi() * x.xi() * dot(&beta, &beta) / (1.0 - phi))
}

/// Solves `(X_SᵀX_S + shift·I) β = X_Sᵀ y_S` over the rows selected by `keep`.
fn ridge_solve(x: &CovariateMatrix, shift: f64, y: &[f64], keep: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    let d = x.d();
    let mut g = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for i in (0..x.n()).filter(|&i| keep(i)) {
        let r = x.row(i);
        for p in 0..d {
            for q in 0..=p {
                g[p * d + q] += r[p] * r[q];
            }
            rhs[p] += y[i] * r[p];
        }
    }
    let g = SymmetricMatrix::from_fn(d, |p, q| g[p * d + q] + if p == q { shift } else { 0.0 });
    Ok(chol_solve(&cholesky_factor(&g)?, &rhs)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeLossMethod {
    ExactL,
    HtHat,
    NonuniformTilde,
    RegressionAlt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeLossEstimate {
    pub value: f64,
    pub method: RidgeLossMethod,
    /// Pair denominators raised to the floor.
    pub floored: usize,
}

/// Smallest pair denominator `1 + z_iz_jE[z_iz_j]` a uniform design can
/// have: four times the lower bound on second-order probabilities.
pub fn uniform_denominator_floor(n: usize, phi: f64) -> f64 {
    let second = if phi >= 1.0 {
        f64::INFINITY
    } else {
        phi * phi / (1.0 - phi)
    };
    phi.min(second) / n as f64
}

fn check_square(m: &SymmetricMatrix, n: usize) -> Result<()> {
    if m.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.order(),
        });
    }
    Ok(())
}

/// `L̂ = yᵀQ̂y` with `Q̂_ij = Q_ij / (1 + z_iz_jE[z_iz_j])` off the diagonal.
pub fn estimate_ridge_loss(q: &QMatrix, data: &OutcomeData, cross: &SymmetricMatrix) -> Result<RidgeLossEstimate> {
    let n = data.n();
    check_square(&q.entries, n)?;
    check_square(cross, n)?;
    let floor = uniform_denominator_floor(n, q.phi);
    let mut floored = 0;
    let mut value = 0.0;
    for i in 0..n {
        let yi = data.y[i];
        value += q.entries.get(i, i) * yi * yi;
        let zi = data.z[i] as f64;
        for j in 0..i {
            let mut den = 1.0 + zi * data.z[j] as f64 * cross.get(i, j);
            if den < floor {
                den = floor;
                floored += 1;
            }
            value += 2.0 * q.entries.get(i, j) * yi * data.y[j] / den;
        }
    }
    Ok(RidgeLossEstimate {
        value,
        method: RidgeLossMethod::HtHat,
        floored,
    })
}

/// `L̃ = ỹᵀQ̃ỹ` with `ỹ_i = y_i/(2π_i)` or `y_i/(2(1−π_i))` and denominators
/// `1 + z_iE z_i (+ z_jE z_j + z_iz_jE z_iz_j)`.
pub fn estimate_ridge_loss_nonuniform(
    q: &QMatrix,
    data: &OutcomeData,
    probabilities: &[f64],
    cross: &SymmetricMatrix,
    marginals: &[f64],
) -> Result<RidgeLossEstimate> {
    let n = data.n();
    check_square(&q.entries, n)?;
    check_square(cross, n)?;
    for len in [probabilities.len(), marginals.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let z: Vec<f64> = data.z.iter().map(|&v| v as f64).collect();
    let yt: Vec<f64> = (0..n)
        .map(|i| {
            let p = probabilities[i];
            data.y[i] / if z[i] > 0.0 { 2.0 * p } else { 2.0 * (1.0 - p) }
        })
        .collect();
    let mut floored = 0;
    let mut clamp = |den: f64| {
        if den < NONUNIFORM_DENOM_FLOOR {
            floored += 1;
            NONUNIFORM_DENOM_FLOOR
        } else {
            den
        }
    };
    let mut value = 0.0;
    for i in 0..n {
        let zi_mi = z[i] * marginals[i];
        value += q.entries.get(i, i) * yt[i] * yt[i] / clamp(1.0 + zi_mi);
        for j in 0..i {
            let den = 1.0 + zi_mi + z[j] * marginals[j] + z[i] * z[j] * cross.get(i, j);
            value += 2.0 * q.entries.get(i, j) * yt[i] * yt[j] / clamp(den);
        }
    }
    Ok(RidgeLossEstimate {
        value,
        method: RidgeLossMethod::NonuniformTilde,
        floored,
    })
}

/// `(L̂_a + L̂_b)/2`, where each arm solves
/// `min_β (2/φ)Σ_arm(y_i − ⟨x_i,β⟩)² + ξ²‖β‖²/(1−φ)`.
pub fn estimate_ridge_loss_regression(x: &CovariateMatrix, phi: f64, data: &OutcomeData) -> Result<RidgeLossEstimate> {
    if data.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: data.n(),
        });
    }
    let arm = |sign: i8, name: &'static str| -> Result<f64> {
        let members: Vec<usize> = (0..data.n()).filter(|&i| data.z[i] == sign).collect();
        if members.is_empty() {
            return Err(Error::EmptyArm { arm: name });
        }
        let ss = |beta: &[f64]| -> f64 {
            members
                .iter()
                .map(|&i| {
                    let r = data.y[i] - dot(x.row(i), beta);
                    r * r
                })
                .sum()
        };
        if phi >= 1.0 || x.d() == 0 {
            return Ok(2.0 / phi * ss(&vec![0.0; x.d()]));
        }
        let xi2 = x.xi() * x.xi();
        let shift = phi * xi2 / (2.0 * (1.0 - phi));
        let beta = ridge_solve(x, shift, &data.y, |i| data.z[i] == sign)?;
        Ok(2.0 / phi * ss(&beta) + xi2 * dot(&beta, &beta) / (1.0 - phi))
    };
    let la = arm(1, "treatment")?;
    let lb = arm(-1, "control")?;
    Ok(RidgeLossEstimate {
        value: 0.5 * (la + lb),
        method: RidgeLossMethod::RegressionAlt,
        floored: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub radius: f64,
    pub alpha: f64,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.radius
    }

    pub fn upper(&self) -> f64 {
        self.center + self.radius
    }

    pub fn contains(&self, value: f64) -> bool {
        (value - self.center).abs() <= self.radius
    }
}

/// Interval of radius `sqrt(8·ln(2/α)·L/n²)` around `tau_hat`.
pub fn confidence_interval(tau_hat: f64, loss: f64, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if loss.is_nan() || loss < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ridge loss must be non-negative, got {loss}"
        )));
    }
    let n2 = (n * n) as f64;
    Ok(ConfidenceInterval {
        center: tau_hat,
        radius: (8.0 * (2.0 / alpha).ln() * loss / n2).sqrt(),
        alpha,
    })
}

/// `4‖m‖²/(φn²)`
pub fn worst_case_mse_bound(m: &[f64], phi: f64) -> f64 {
    let n = m.len() as f64;
    4.0 * dot(m, m) / (phi * n * n)
}

/// `(4/n²)·m̃ᵀ·cov·m̃`
pub fn mse_from_cov(cov: &SymmetricMatrix, m_tilde: &[f64], n: usize) -> f64 {
    4.0 * cov.quad_form(m_tilde) / (n * n) as f64
}
