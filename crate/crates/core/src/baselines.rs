//! Comparison designs: independent assignment, a uniformly random equal
//! split, and rerandomization on the covariate imbalance.

use crate::covariates::CovariateMatrix;
use crate::design::{Assignment, Design};
use crate::diagnostics::imbalance_norm;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Independent signs with `P(z_i = 1) = π_i`.
pub fn bernoulli_design(probabilities: &[f64], rng: &mut RandomStream) -> Assignment {
    Assignment::new(
        probabilities
            .iter()
            .map(|&p| if rng.gen::<f64>() < p { 1 } else { -1 })
            .collect(),
    )
}

/// Exactly `n/2` treated units, all such splits equally likely.
pub fn group_balanced_design(n: usize, rng: &mut RandomStream) -> Result<Assignment> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddN { n });
    }
    let mut z: Vec<i8> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
    z.shuffle(rng);
    Ok(Assignment::new(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerandBase {
    Bernoulli,
    GroupBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerandConfig {
    /// Accept when `‖Xᵀz‖²` is at most this fraction of `Σ‖x_i‖²`.
    pub criterion_fraction: f64,
    pub max_draws: usize,
    pub base: RerandBase,
}

impl RerandConfig {
    /// `a·Σ‖x_i‖²`, using that `E‖Xᵀz‖² = Σ‖x_i‖²` under independent fair signs.
    pub fn threshold(&self, x: &CovariateMatrix) -> f64 {
        self.criterion_fraction * x.squared_frobenius()
    }

    fn validate(&self) -> Result<()> {
        if !(self.criterion_fraction > 0.0 && self.criterion_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "criterion fraction must lie in (0, 1], got {}",
                self.criterion_fraction
            )));
        }
        if self.max_draws == 0 {
            return Err(Error::InvalidConfig("max_draws must be positive".into()));
        }
        Ok(())
    }
}

/// Draws from the base design until the imbalance passes the threshold.
pub fn rerandomize(x: &CovariateMatrix, config: &RerandConfig, rng: &mut RandomStream) -> Result<Assignment> {
    config.validate()?;
    let threshold = config.threshold(x);
    let half = vec![0.5; x.n()];
    for _ in 0..config.max_draws {
        let a = match config.base {
            RerandBase::Bernoulli => bernoulli_design(&half, rng),
            RerandBase::GroupBalanced => group_balanced_design(x.n(), rng)?,
        };
        if imbalance_norm(&a.z, x) <= threshold {
            return Ok(a);
        }
    }
    Err(Error::ExhaustedDraws {
        draws: config.max_draws,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliDesign {
    probabilities: Vec<f64>,
}

impl BernoulliDesign {
    pub fn uniform(n: usize) -> Self {
        Self {
            probabilities: vec![0.5; n],
        }
    }

    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if let Some(p) = probabilities.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidConfig(format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(Self { probabilities })
    }
}

impl Design for BernoulliDesign {
    fn n(&self) -> usize {
        self.probabilities.len()
    }

    fn draw(&self, rng: &mut RandomStream) -> Result<Assignment> {
        Ok(bernoulli_design(&self.probabilities, rng))
    }

    fn name(&self) -> &'static str {
        "bernoulli"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupBalancedDesign {
    n: usize,
}

impl GroupBalancedDesign {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::OddN { n });
        }
        Ok(Self { n })
    }
}

impl Design for GroupBalancedDesign {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut RandomStream) -> Result<Assignment> {
        group_balanced_design(self.n, rng)
    }

    fn name(&self) -> &'static str {
        "balanced-random"
    }
}

#[derive(Debug, Clone)]
pub struct RerandomizedDesign<'a> {
    x: &'a CovariateMatrix,
    config: RerandConfig,
}

impl<'a> RerandomizedDesign<'a> {
    pub fn new(x: &'a CovariateMatrix, config: RerandConfig) -> Result<Self> {
        config.validate()?;
        if config.base == RerandBase::GroupBalanced && !x.n().is_multiple_of(2) {
            return Err(Error::OddN { n: x.n() });
        }
        Ok(Self { x, config })
    }
}

impl Design for RerandomizedDesign<'_> {
    fn n(&self) -> usize {
        self.x.n()
    }

    fn draw(&self, rng: &mut RandomStream) -> Result<Assignment> {
        rerandomize(self.x, &self.config, rng)
    }

    fn name(&self) -> &'static str {
        "rerand"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::mc_moments;
    use crate::rng::stream;

    fn centered_x(n: usize, d: usize, seed: u64) -> CovariateMatrix {
        let mut rng = stream(seed, 2);
        let raw: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = CovariateMatrix::new(n, d, raw.clone()).unwrap();
        let means = x.column_means();
        let centered = raw.iter().enumerate().map(|(k, v)| v - means[k % d]).collect();
        CovariateMatrix::new(n, d, centered).unwrap()
    }

    #[test]
    fn bernoulli_marginals_and_independence() {
        let r = 100_000;
        let mom = mc_moments(&BernoulliDesign::uniform(3), r, 1).unwrap();
        let band = 4.0 / (r as f64).sqrt();
        for i in 0..3 {
            for j in 0..i {
                assert!(mom.cov_hat.get(i, j).abs() <= band);
            }
        }
        let skew = mc_moments(&BernoulliDesign::new(vec![0.9]).unwrap(), r, 2).unwrap();
        let se = (1.0 - 0.8f64 * 0.8).sqrt() / (r as f64).sqrt();
        assert!((skew.mean_hat[0] - 0.8).abs() <= 4.0 * se);
        assert!(BernoulliDesign::new(vec![1.0]).is_err());

        let mut rng = stream(3, 0);
        let single: Vec<i8> = (0..1000).map(|_| bernoulli_design(&[0.5], &mut rng).z[0]).collect();
        assert!(single.contains(&1) && single.contains(&-1));
    }

    #[test]
    fn group_balanced_splits() {
        let mut rng = stream(4, 0);
        let mut plus_first = 0;
        for _ in 0..4000 {
            let z = group_balanced_design(2, &mut rng).unwrap().z;
            assert!(z == vec![1, -1] || z == vec![-1, 1]);
            plus_first += (z[0] == 1) as usize;
        }
        assert!((plus_first as f64 / 4000.0 - 0.5).abs() <= 4.0 * (0.25f64 / 4000.0).sqrt());
        assert_eq!(group_balanced_design(3, &mut rng), Err(Error::OddN { n: 3 }));
        for _ in 0..100 {
            let z = group_balanced_design(10, &mut rng).unwrap().z;
            assert_eq!(z.iter().map(|&v| v as i32).sum::<i32>(), 0);
        }
    }

    #[test]
    fn group_balanced_covariance() {
        let (n, r) = (6, 100_000);
        let mom = mc_moments(&GroupBalancedDesign::new(n).unwrap(), r, 5).unwrap();
        let off = -1.0 / (n as f64 - 1.0);
        let band = 4.0 / (r as f64).sqrt();
        for i in 0..n {
            for j in 0..i {
                assert!((mom.cov_hat.get(i, j) - off).abs() <= band);
            }
        }
    }

    #[test]
    fn rerandomization_accepts_within_threshold() {
        let x = centered_x(40, 3, 6);
        let cfg = RerandConfig {
            criterion_fraction: 1.0,
            max_draws: 1000,
            base: RerandBase::Bernoulli,
        };
        let threshold = cfg.threshold(&x);
        let mut rng = stream(7, 0);
        for _ in 0..200 {
            let a = rerandomize(&x, &cfg, &mut rng).unwrap();
            assert!(imbalance_norm(&a.z, &x) <= threshold);
        }
        // Acceptance rate at a = 1 is a constant fraction.
        let mut rng = stream(8, 0);
        let half = vec![0.5; 40];
        let accepted = (0..4000)
            .filter(|_| imbalance_norm(&bernoulli_design(&half, &mut rng).z, &x) <= threshold)
            .count();
        assert!(accepted as f64 / 4000.0 >= 0.4, "{accepted}");
    }

    #[test]
    fn rerandomization_gives_up() {
        // Every unit has the same covariate, so the imbalance is at least 1·‖x‖² when n is odd.
        let x = CovariateMatrix::new(5, 1, vec![1.0; 5]).unwrap();
        let cfg = RerandConfig {
            criterion_fraction: 0.01,
            max_draws: 50,
            base: RerandBase::Bernoulli,
        };
        assert_eq!(
            rerandomize(&x, &cfg, &mut stream(0, 0)),
            Err(Error::ExhaustedDraws { draws: 50 })
        );
        let bad = RerandConfig {
            criterion_fraction: 0.0,
            ..cfg
        };
        assert!(RerandomizedDesign::new(&x, bad).is_err());
    }

    #[test]
    fn all_baselines_keep_fair_marginals() {
        let x = centered_x(10, 2, 9);
        let r = 20_000;
        let designs: Vec<Box<dyn Design + '_>> = vec![
            Box::new(BernoulliDesign::uniform(10)),
            Box::new(GroupBalancedDesign::new(10).unwrap()),
            Box::new(
                RerandomizedDesign::new(
                    &x,
                    RerandConfig {
                        criterion_fraction: 0.5,
                        max_draws: 10_000,
                        base: RerandBase::GroupBalanced,
                    },
                )
                .unwrap(),
            ),
        ];
        let band = 4.0 * (0.25 / r as f64).sqrt();
        for d in &designs {
            let mom = mc_moments(d.as_ref(), r, 10).unwrap();
            for i in 0..10 {
                assert!((mom.marginal(i) - 0.5).abs() <= band, "{} unit {i}", d.name());
            }
        }
    }
}
