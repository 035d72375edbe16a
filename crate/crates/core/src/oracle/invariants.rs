//! Distributional guarantees of the design, checked against an exact law.

use super::{exact_expectation, exact_moments, DesignDistribution, ExactMoments};
use crate::covariates::CovariateMatrix;
use crate::error::Result;
use crate::estimators::{
    average_treatment_effect, compute_q, estimate_ridge_loss, estimate_ridge_loss_nonuniform, ht_estimate,
    mse_from_cov, normalized_potential_outcomes, ridge_loss_exact, worst_case_mse_bound, OutcomeData,
};
use crate::linalg::{chol_solve, cholesky_factor, dot, sym_eigen, SymmetricMatrix};
use crate::rng::stream;
use crate::sampler::DesignConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const SUBGAUSSIAN_DIRECTIONS: usize = 50;

/// Potential outcomes under treatment (`a`) and control (`b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// One invariant: `excess` is how far the measured quantity lies past its
/// bound (non-positive when the bound holds exactly) and passes when it is
/// at most `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub excess: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Checks(Vec<InvariantCheck>);

impl Checks {
    fn push(&mut self, name: &str, excess: f64, tolerance: f64) {
        self.0.push(InvariantCheck {
            name: name.to_string(),
            excess,
            tolerance,
            passed: excess <= tolerance,
        });
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

/// `B = [√φ I ; ξ⁻¹√(1−φ) Xᵀ]`, the `(n+d) × n` augmented covariates.
fn augmented_matrix(x: &CovariateMatrix, phi: f64) -> Vec<f64> {
    let (n, d) = (x.n(), x.d());
    let sc = (1.0 - phi).sqrt() / x.xi();
    let mut b = vec![0.0; (n + d) * n];
    for i in 0..n {
        b[i * n + i] = phi.sqrt();
        for (r, v) in x.row(i).iter().enumerate() {
            b[(n + r) * n + i] = sc * v;
        }
    }
    b
}

/// Smallest eigenvalue of `P_B − B·cov·Bᵀ`.
fn projection_gap(x: &CovariateMatrix, phi: f64, cov: &SymmetricMatrix) -> Result<f64> {
    let (n, rows) = (x.n(), x.n() + x.d());
    let b = augmented_matrix(x, phi);
    let col = |c: usize| -> Vec<f64> { (0..rows).map(|r| b[r * n + c]).collect() };
    let cols: Vec<Vec<f64>> = (0..n).map(col).collect();
    let gram = SymmetricMatrix::from_fn(n, |i, j| dot(&cols[i], &cols[j]));
    let factor = cholesky_factor(&gram)?;
    // P_B = B G⁻¹ Bᵀ; each row of B G⁻¹ is G⁻¹ applied to a row of B.
    let bg: Vec<Vec<f64>> = (0..rows)
        .map(|r| chol_solve(&factor, &b[r * n..(r + 1) * n]))
        .collect::<std::result::Result<_, _>>()?;
    let bc: Vec<Vec<f64>> = (0..rows).map(|r| cov.matvec(&b[r * n..(r + 1) * n])).collect();
    let gap = SymmetricMatrix::from_fn(rows, |r, s| {
        let row_s = &b[s * n..(s + 1) * n];
        dot(&bg[r], row_s) - dot(&bc[r], row_s)
    });
    Ok(sym_eigen(&gap)?.min())
}

/// Runs every distributional check on an exact law of the design.
pub fn check_invariants(
    x: &CovariateMatrix,
    config: &DesignConfig,
    dist: &DesignDistribution,
    outcomes: &[OutcomeTable],
    seed: u64,
) -> Result<Vec<InvariantCheck>> {
    let n = x.n();
    let phi = config.phi;
    let pi = &config.probabilities;
    let uniform = config.is_uniform();
    let mom: ExactMoments = exact_moments(dist);
    let mut c = Checks(Vec::new());

    let min_p = dist.support.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    c.push("probabilities are non-negative", -min_p, 0.0);
    c.push(
        "probabilities sum to one",
        (dist.total_probability() - 1.0).abs(),
        1e-10,
    );

    let start = config.initial_point();
    c.push(
        "mean equals 2pi - 1",
        max_of(mom.mean.iter().zip(&start).map(|(m, s)| (m - s).abs())),
        1e-10,
    );
    c.push(
        "marginals equal target probabilities",
        max_of((0..n).map(|i| (exact_expectation(dist, |z| (z[i] > 0) as u8 as f64) - pi[i]).abs())),
        1e-10,
    );

    let lam = sym_eigen(&mom.cov)?.max();
    c.push("largest covariance eigenvalue at most 1/phi", lam - 1.0 / phi, 1e-9);

    c.push(
        "augmented covariance below projection",
        -projection_gap(x, phi, &mom.cov)?,
        1e-8,
    );

    let mut rng = stream(seed, 0);
    let sc = (1.0 - phi).sqrt() / x.xi();
    let mut worst_ratio = f64::NEG_INFINITY;
    for k in 0..SUBGAUSSIAN_DIRECTIONS {
        let radius = 0.25 + 2.75 * k as f64 / SUBGAUSSIAN_DIRECTIONS as f64;
        let mut v: Vec<f64> = (0..n + x.d()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dot(&v, &v).sqrt().max(1e-300);
        v.iter_mut().for_each(|t| *t *= radius / norm);
        // ⟨B(z − μ), v⟩ = ⟨z − μ, Bᵀv⟩
        let g: Vec<f64> = (0..n)
            .map(|i| phi.sqrt() * v[i] + sc * dot(x.row(i), &v[n..]))
            .collect();
        let mgf = exact_expectation(dist, |z| {
            (0..n).map(|i| (z[i] as f64 - mom.mean[i]) * g[i]).sum::<f64>().exp()
        });
        worst_ratio = worst_ratio.max(mgf / (0.5 * radius * radius).exp() - 1.0);
    }
    c.push("subgaussian moment generating bound", worst_ratio, 1e-9);

    if uniform {
        let bound = {
            let second = if phi >= 1.0 {
                f64::INFINITY
            } else {
                phi * phi / (1.0 - phi)
            };
            phi.min(second) / (4.0 * n as f64)
        };
        let mut lowest = f64::INFINITY;
        let mut farthest = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                for (vi, vj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let p = dist.pair_probability(i, vi, j, vj);
                    lowest = lowest.min(p);
                    farthest = farthest.max((p - 0.25).abs());
                }
            }
        }
        if n >= 2 {
            c.push("pair probabilities above lower bound", bound - lowest, 1e-10);
            c.push(
                "pair probabilities near one quarter",
                farthest - (1.0 - phi) / phi,
                1e-10,
            );
        }
    }

    if !outcomes.is_empty() {
        let q = compute_q(x, phi)?;
        let mut unbiased = f64::NEG_INFINITY;
        let mut identity = f64::NEG_INFINITY;
        let mut ridge_bound = f64::NEG_INFINITY;
        let mut worst_case = f64::NEG_INFINITY;
        let mut hat = f64::NEG_INFINITY;
        let mut tilde = f64::NEG_INFINITY;
        for t in outcomes {
            let tau = average_treatment_effect(&t.a, &t.b);
            let m = normalized_potential_outcomes(&t.a, &t.b, pi);
            let loss = ridge_loss_exact(&q, &m);
            let scale = 1.0 + loss;
            let est = |z: &[i8]| ht_estimate(&OutcomeData::observe(&t.a, &t.b, z), pi);
            let mean = exact_expectation(dist, est);
            let mse = exact_expectation(dist, |z| (est(z) - tau).powi(2));
            unbiased = unbiased.max((mean - tau).abs() / (1.0 + tau.abs()));
            identity = identity.max((mse - mse_from_cov(&mom.cov, &m, n)).abs() / (1.0 + mse));
            ridge_bound = ridge_bound.max((mse - 4.0 * loss / (n * n) as f64) / scale);
            worst_case = worst_case.max((mse - worst_case_mse_bound(&m, phi)) / scale);
            let tilde_mean = exact_expectation(dist, |z| {
                let data = OutcomeData::observe(&t.a, &t.b, z);
                estimate_ridge_loss_nonuniform(&q, &data, pi, &mom.cross, &mom.mean).map_or(f64::NAN, |e| e.value)
            });
            tilde = tilde.max((loss - tilde_mean) / scale);
            if uniform {
                let hat_mean = exact_expectation(dist, |z| {
                    let data = OutcomeData::observe(&t.a, &t.b, z);
                    estimate_ridge_loss(&q, &data, &mom.cross).map_or(f64::NAN, |e| e.value)
                });
                hat = hat.max((loss - hat_mean) / scale);
            }
        }
        c.push("estimator unbiased", unbiased, 1e-10);
        c.push("mean squared error equals covariance form", identity, 1e-10);
        c.push("mean squared error at most 4L/n^2", ridge_bound, 1e-10);
        c.push("mean squared error at most worst-case bound", worst_case, 1e-10);
        if uniform {
            c.push("ridge loss estimate conservative", hat, 1e-10);
        }
        c.push("normalized ridge loss estimate conservative", tilde, 1e-10);
    }
    Ok(c.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::enumerate_distribution;

    #[test]
    fn small_instances_pass_everything() {
        let x =
            CovariateMatrix::from_rows(&[vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -0.7], vec![0.9, 0.9]]).unwrap();
        let tables = vec![OutcomeTable {
            a: vec![1.0, 2.0, -0.5, 3.0],
            b: vec![0.5, 1.0, 0.0, 1.5],
        }];
        for cfg in [
            DesignConfig::uniform(4, 0.5),
            DesignConfig::uniform(4, 0.2),
            DesignConfig::with_probabilities(0.5, vec![0.3, 0.6, 0.45, 0.7]),
        ] {
            let dist = enumerate_distribution(&x, &cfg).unwrap();
            let checks = check_invariants(&x, &cfg, &dist, &tables, 3).unwrap();
            for ch in &checks {
                assert!(ch.passed, "{ch:?}");
            }
        }
    }

    #[test]
    fn a_biased_law_fails_the_mean_check() {
        let x = CovariateMatrix::from_rows(&[vec![1.0], vec![0.5]]).unwrap();
        let cfg = DesignConfig::uniform(2, 0.5);
        let dist = DesignDistribution {
            n: 2,
            support: vec![(vec![1, 1], 0.5), (vec![1, -1], 0.5)],
        };
        let checks = check_invariants(&x, &cfg, &dist, &[], 0).unwrap();
        let mean = checks.iter().find(|c| c.name == "mean equals 2pi - 1").unwrap();
        assert!(!mean.passed);
    }
}
