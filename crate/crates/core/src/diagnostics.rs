//! Monte Carlo characterization of a design.
//!
//! Draws are stored bit-packed per unit (bit set means `z = +1`), so the
//! cross moments reduce to popcounts: `Σ_k z_ikz_jk = R − 2·|B_i ⊕ B_j|`.
//! All sums are integers, which makes the moments bit-identical for a given
//! `(seed, R)` regardless of how replicates are split across threads.

use crate::covariates::CovariateMatrix;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::{dot, sym_eigen, SymmetricMatrix};
use crate::rng::stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Width of the standard-error band used by stochastic checks.
pub const MC_BAND: f64 = 4.0;

/// `R` draws of a design for `n` units, bit-packed unit by unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    n: usize,
    replicates: usize,
    words: usize,
    bits: Vec<u64>,
}

impl DrawMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    #[inline]
    fn unit_bits(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn sign(&self, i: usize, k: usize) -> i8 {
        if self.bits[i * self.words + k / 64] >> (k % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Assignment of replicate `k`.
    pub fn assignment(&self, k: usize) -> Vec<i8> {
        (0..self.n).map(|i| self.sign(i, k)).collect()
    }

    /// `⟨v, z_k⟩` for every replicate.
    pub fn projections(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let total: f64 = v.iter().sum();
        let mut out = vec![-total; self.replicates];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let twice = 2.0 * vi;
            for (w, &word) in self.unit_bits(i).iter().enumerate() {
                let mut m = word;
                while m != 0 {
                    let b = m.trailing_zeros() as usize;
                    out[w * 64 + b] += twice;
                    m &= m - 1;
                }
            }
        }
        out
    }

    /// Sample variance of `⟨v, z⟩` (an estimate of `vᵀCov(z)v`) and its
    /// replicate-level standard error.
    pub fn quadratic_form(&self, v: &[f64]) -> (f64, f64) {
        variance_with_error(&self.projections(v))
    }

    pub fn moments(&self, seed: u64) -> MonteCarloMoments {
        let (n, r) = (self.n, self.replicates as i64);
        let plus: Vec<i64> = (0..n)
            .map(|i| self.unit_bits(i).iter().map(|w| w.count_ones() as i64).sum())
            .collect();
        let sums: Vec<i64> = plus.iter().map(|&p| 2 * p - r).collect();
        let cross_sums: Vec<Vec<i64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let bi = self.unit_bits(i);
                (0..=i)
                    .map(|j| {
                        let diff: i64 = bi
                            .iter()
                            .zip(self.unit_bits(j))
                            .map(|(a, b)| (a ^ b).count_ones() as i64)
                            .sum();
                        r - 2 * diff
                    })
                    .collect()
            })
            .collect();
        let rf = r as f64;
        let mean_hat: Vec<f64> = sums.iter().map(|&s| s as f64 / rf).collect();
        let cross_hat = SymmetricMatrix::from_fn(n, |i, j| cross_sums[i][j] as f64 / rf);
        let cov_hat = SymmetricMatrix::from_fn(n, |i, j| cross_hat.get(i, j) - mean_hat[i] * mean_hat[j]);
        MonteCarloMoments {
            replicates: self.replicates,
            mean_hat,
            cross_hat,
            cov_hat,
            seed,
            plus_counts: plus.into_iter().map(|p| p as u64).collect(),
        }
    }

    /// Splits replicates into the first `k` and the rest.
    pub fn split(&self, k: usize) -> (DrawMatrix, DrawMatrix) {
        let pick = |range: std::ops::Range<usize>| {
            let r = range.len();
            let words = r.div_ceil(64);
            let mut bits = vec![0u64; self.n * words];
            for i in 0..self.n {
                for (t, k) in range.clone().enumerate() {
                    if self.sign(i, k) > 0 {
                        bits[i * words + t / 64] |= 1 << (t % 64);
                    }
                }
            }
            DrawMatrix {
                n: self.n,
                replicates: r,
                words,
                bits,
            }
        };
        (pick(0..k), pick(k..self.replicates))
    }
}

/// Sample variance and the standard error of that variance.
fn variance_with_error(w: &[f64]) -> (f64, f64) {
    let r = w.len() as f64;
    let mean = w.iter().sum::<f64>() / r;
    let sq: Vec<f64> = w.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = sq.iter().sum::<f64>() / (r - 1.0);
    let m2 = sq.iter().sum::<f64>() / r;
    let var_of_sq = sq.iter().map(|s| (s - m2) * (s - m2)).sum::<f64>() / (r - 1.0);
    (var, (var_of_sq / r).sqrt())
}

/// Draws `r` assignments, replicate `k` from the stream `(seed, k)`.
pub fn collect_draws(design: &dyn Design, r: usize, seed: u64) -> Result<DrawMatrix> {
    if r < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 replicates, got {r}")));
    }
    let n = design.n();
    let words = r.div_ceil(64);
    let blocks: Vec<Vec<u64>> = (0..words)
        .into_par_iter()
        .map(|w| -> Result<Vec<u64>> {
            let mut block = vec![0u64; n];
            for b in 0..64.min(r - w * 64) {
                let k = w * 64 + b;
                let z = design.draw(&mut stream(seed, k as u64))?.z;
                for (word, &zi) in block.iter_mut().zip(&z) {
                    if zi > 0 {
                        *word |= 1 << b;
                    }
                }
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;
    let mut bits = vec![0u64; n * words];
    for (w, block) in blocks.iter().enumerate() {
        for (i, &word) in block.iter().enumerate() {
            bits[i * words + w] = word;
        }
    }
    Ok(DrawMatrix {
        n,
        replicates: r,
        words,
        bits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloMoments {
    pub replicates: usize,
    pub mean_hat: Vec<f64>,
    pub cross_hat: SymmetricMatrix,
    pub cov_hat: SymmetricMatrix,
    pub seed: u64,
    /// Replicates with `z_i = +1`, per unit.
    pub plus_counts: Vec<u64>,
}

impl MonteCarloMoments {
    pub fn n(&self) -> usize {
        self.mean_hat.len()
    }

    /// Empirical `P(z_i = +1)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.plus_counts[i] as f64 / self.replicates as f64
    }
}

pub fn mc_moments(design: &dyn Design, r: usize, seed: u64) -> Result<MonteCarloMoments> {
    Ok(collect_draws(design, r, seed)?.moments(seed))
}

/// `P(z_i = v_i, z_j = v_j) = ¼(1 + v_iE z_i + v_jE z_j + v_iv_jE z_iz_j)`
/// for every pair `j < i` and sign pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PairProbabilities {
    n: usize,
    /// Patterns ordered `(+,+), (+,−), (−,+), (−,−)`.
    table: Vec<[f64; 4]>,
}

impl PairProbabilities {
    fn index(i: usize, j: usize) -> usize {
        let (i, j) = if i > j { (i, j) } else { (j, i) };
        i * (i - 1) / 2 + j
    }

    pub fn get(&self, i: usize, vi: i8, j: usize, vj: i8) -> f64 {
        assert_ne!(i, j);
        let (hi_v, lo_v) = if i > j { (vi, vj) } else { (vj, vi) };
        let slot = ((hi_v < 0) as usize) * 2 + (lo_v < 0) as usize;
        self.table[Self::index(i, j)][slot]
    }

    pub fn min(&self) -> f64 {
        self.table.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn second_order_probabilities(mom: &MonteCarloMoments) -> PairProbabilities {
    pair_probabilities_from(&mom.mean_hat, &mom.cross_hat)
}

pub fn pair_probabilities_from(mean: &[f64], cross: &SymmetricMatrix) -> PairProbabilities {
    let n = mean.len();
    let mut table = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..n {
        for j in 0..i {
            let mut row = [0.0; 4];
            for (slot, (vi, vj)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                .into_iter()
                .enumerate()
            {
                row[slot] = 0.25 * (1.0 + vi * mean[i] + vj * mean[j] + vi * vj * cross.get(i, j));
            }
            table.push(row);
        }
    }
    PairProbabilities { n, table }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_z: f64,
    pub lambda_xz: f64,
    pub mean_sq_imbalance: f64,
    pub group_size_msq: f64,
}

pub fn spectral_report(mom: &MonteCarloMoments, x: &CovariateMatrix) -> Result<SpectralReport> {
    spectral_report_from(&mom.cov_hat, &mom.cross_hat, x)
}

pub fn spectral_report_from(
    cov: &SymmetricMatrix,
    cross: &SymmetricMatrix,
    x: &CovariateMatrix,
) -> Result<SpectralReport> {
    let lambda_z = sym_eigen(cov)?.max();
    let lambda_xz = sym_eigen(&cov.congruence(x.as_slice(), x.d()))?.max();
    let mean_sq_imbalance = cross.congruence(x.as_slice(), x.d()).trace();
    let ones = vec![1.0; cross.order()];
    Ok(SpectralReport {
        lambda_z,
        lambda_xz,
        mean_sq_imbalance,
        group_size_msq: cross.quad_form(&ones),
    })
}

/// Standard errors of the two eigenvalue estimates, to first order: the
/// error of `v̂ᵀĈov v̂` with the leading eigenvector `v̂` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralErrors {
    pub lambda_z_se: f64,
    pub lambda_xz_se: f64,
}

pub fn spectral_errors(draws: &DrawMatrix, mom: &MonteCarloMoments, x: &CovariateMatrix) -> Result<SpectralErrors> {
    let vz = sym_eigen(&mom.cov_hat)?.vector(0);
    let cxz = sym_eigen(&mom.cov_hat.congruence(x.as_slice(), x.d()))?;
    let lambda_xz_se = if x.d() == 0 {
        0.0
    } else {
        draws.quadratic_form(&x.mul(&cxz.vector(0))).1
    };
    Ok(SpectralErrors {
        lambda_z_se: draws.quadratic_form(&vz).1,
        lambda_xz_se,
    })
}

/// `‖Xᵀz‖²`
pub fn imbalance_norm(z: &[i8], x: &CovariateMatrix) -> f64 {
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let s = x.transpose_mul(&zf);
    dot(&s, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{BernoulliDesign, GroupBalancedDesign};
    use crate::oracle::{enumerate_distribution, exact_moments};
    use crate::sampler::{DesignConfig, GswDesign};
    use rand::Rng;

    fn random_x(n: usize, d: usize, seed: u64) -> CovariateMatrix {
        let mut rng = stream(seed, 3);
        CovariateMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn independent_signs_have_small_cross_moments() {
        let x = random_x(3, 2, 1);
        let design = GswDesign::new(&x, DesignConfig::uniform(3, 1.0)).unwrap();
        let r = 100_000;
        let mom = mc_moments(&design, r, 4).unwrap();
        let band = 4.0 / (r as f64).sqrt();
        for i in 0..3 {
            assert_eq!(mom.cross_hat.get(i, i), 1.0);
            for j in 0..i {
                assert!(mom.cross_hat.get(i, j).abs() <= band);
            }
        }
        let rep = spectral_report(&mom, &x).unwrap();
        assert!((rep.lambda_z - 1.0).abs() <= 0.05);
    }

    #[test]
    fn two_replicates_are_consistent() {
        let x = random_x(5, 1, 2);
        let design = GswDesign::new(&x, DesignConfig::uniform(5, 0.5)).unwrap();
        let mom = mc_moments(&design, 2, 0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let c = mom.cross_hat.get(i, j) - mom.mean_hat[i] * mom.mean_hat[j];
                assert!((mom.cov_hat.get(i, j) - c).abs() <= 1e-12);
            }
        }
        assert!(mc_moments(&design, 1, 0).is_err());
    }

    #[test]
    fn matches_oracle_cross_moments() {
        let x =
            CovariateMatrix::from_rows(&[vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -0.7], vec![0.9, 0.9]]).unwrap();
        let cfg = DesignConfig::uniform(4, 0.5);
        let exact = exact_moments(&enumerate_distribution(&x, &cfg).unwrap());
        let design = GswDesign::new(&x, cfg).unwrap();
        let r = 1_000_000;
        let mom = mc_moments(&design, r, 8).unwrap();
        let band = 5.0 / (r as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                assert!((mom.cross_hat.get(i, j) - exact.cross.get(i, j)).abs() <= band);
            }
        }
        let pairs = second_order_probabilities(&mom);
        let exact_pairs = pair_probabilities_from(&exact.mean, &exact.cross);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    for (vi, vj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                        assert!((pairs.get(i, vi, j, vj) - exact_pairs.get(i, vi, j, vj)).abs() <= band);
                    }
                }
            }
        }
    }

    #[test]
    fn reproducible_bits() {
        let x = random_x(20, 3, 3);
        let design = GswDesign::new(&x, DesignConfig::uniform(20, 0.3)).unwrap();
        let a = collect_draws(&design, 300, 9).unwrap();
        let b = collect_draws(&design, 300, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.moments(9), b.moments(9));
        assert_eq!(a.assignment(17), design.draw(&mut stream(9, 17)).unwrap().z);
    }

    #[test]
    fn pair_probability_formula() {
        let mean = [0.0, 0.0];
        let indep = pair_probabilities_from(&mean, &SymmetricMatrix::identity(2));
        assert_eq!(indep.get(0, 1, 1, -1), 0.25);
        let mut anti = SymmetricMatrix::identity(2);
        anti.set(0, 1, -1.0);
        let p = pair_probabilities_from(&mean, &anti);
        assert_eq!(p.get(0, 1, 1, 1), 0.0);
        assert_eq!(p.get(1, 1, 0, -1), 0.5);
        assert_eq!(p.min(), 0.0);
    }

    #[test]
    fn group_balanced_exact_covariance() {
        let n = 6;
        let nf = n as f64;
        let cov = SymmetricMatrix::from_fn(n, |i, j| (if i == j { nf } else { 0.0 } - 1.0) / (nf - 1.0));
        let x = random_x(n, 2, 4);
        let rep = spectral_report_from(&cov, &cov, &x).unwrap();
        assert!((rep.lambda_z - nf / (nf - 1.0)).abs() < 1e-12);
        assert!(rep.group_size_msq.abs() < 1e-12);
    }

    #[test]
    fn baselines_feed_the_same_pipeline() {
        let x = random_x(8, 2, 5);
        let designs: Vec<Box<dyn Design>> = vec![
            Box::new(BernoulliDesign::uniform(8)),
            Box::new(GroupBalancedDesign::new(8).unwrap()),
            Box::new(GswDesign::new(&x, DesignConfig::uniform(8, 0.5)).unwrap()),
        ];
        for d in &designs {
            let mom = mc_moments(d.as_ref(), 2_000, 1).unwrap();
            let rep = spectral_report(&mom, &x).unwrap();
            assert!(rep.lambda_z >= 0.0 && rep.lambda_xz >= 0.0);
        }
        let bal = mc_moments(designs[1].as_ref(), 500, 2).unwrap();
        assert!(spectral_report(&bal, &x).unwrap().group_size_msq.abs() < 1e-12);
    }

    #[test]
    fn imbalance_examples() {
        let x = random_x(7, 3, 6);
        let ones = vec![1i8; 7];
        let s = x.transpose_mul(&[1.0; 7]);
        assert!((imbalance_norm(&ones, &x) - dot(&s, &s)).abs() < 1e-12);
        let means = x.column_means();
        let centered: Vec<f64> = (0..7)
            .flat_map(|i| x.row(i).iter().zip(&means).map(|(v, m)| v - m).collect::<Vec<_>>())
            .collect();
        let xc = CovariateMatrix::new(7, 3, centered).unwrap();
        assert!(imbalance_norm(&ones, &xc) < 1e-24);
        let z = [1i8, -1, 1, 1, -1, -1, 1];
        let brute: f64 = (0..3)
            .map(|j| (0..7).map(|i| z[i] as f64 * x.row(i)[j]).sum::<f64>().powi(2))
            .sum();
        assert!((imbalance_norm(&z, &x) - brute).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_and_split() {
        let design = BernoulliDesign::uniform(5);
        let draws = collect_draws(&design, 10_000, 3).unwrap();
        let v = [1.0, -1.0, 0.5, 0.0, 2.0];
        let (q, se) = draws.quadratic_form(&v);
        let truth = dot(&v, &v);
        assert!((q - truth).abs() <= 4.0 * se);
        let (a, b) = draws.split(4_000);
        assert_eq!((a.replicates(), b.replicates()), (4_000, 6_000));
        assert_eq!(b.assignment(0), draws.assignment(4_000));
        let proj = draws.projections(&v);
        let z = draws.assignment(123);
        let direct: f64 = z.iter().zip(&v).map(|(&a, b)| a as f64 * b).sum();
        assert!((proj[123] - direct).abs() < 1e-12);
    }
}
