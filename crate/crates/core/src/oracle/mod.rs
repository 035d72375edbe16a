//! Exact law of the walk on small instances.
//!
//! The walk makes only two kinds of random choice: which alive unit becomes
//! the pivot, and the sign of each step. Enumerating both exhaustively gives
//! the full distribution over assignments. Directions come from the explicit
//! reference solvers so the result does not depend on the fast path.

pub mod invariants;

use crate::covariates::CovariateMatrix;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::sampler::{
    apply_step, step_direction_balanced_kkt, step_direction_naive, step_sizes, DesignConfig, WalkState,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MAX_UNITS: usize = 8;

/// One saved instance: covariates, design settings and outcome tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub name: String,
    pub covariates: Vec<Vec<f64>>,
    pub phi: f64,
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub balanced: bool,
    pub outcomes: Vec<invariants::OutcomeTable>,
}

impl CorpusInstance {
    pub fn covariate_matrix(&self) -> Result<CovariateMatrix> {
        CovariateMatrix::from_rows(&self.covariates)
    }

    pub fn config(&self) -> DesignConfig {
        DesignConfig::with_probabilities(self.phi, self.probabilities.clone()).balanced(self.balanced)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDistribution {
    pub n: usize,
    /// Distinct assignments in lexicographic order with their probabilities.
    pub support: Vec<(Vec<i8>, f64)>,
}

impl DesignDistribution {
    pub fn total_probability(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for (_, p) in &self.support {
            s.add(*p);
        }
        s.value()
    }

    pub fn probability_of(&self, z: &[i8]) -> f64 {
        self.support.iter().find(|(a, _)| a == z).map_or(0.0, |(_, p)| *p)
    }

    /// `P(z_i = v_i, z_j = v_j)`
    pub fn pair_probability(&self, i: usize, vi: i8, j: usize, vj: i8) -> f64 {
        exact_expectation(self, |z| if z[i] == vi && z[j] == vj { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub mean: Vec<f64>,
    pub cov: SymmetricMatrix,
    /// `E[zzᵀ]`
    pub cross: SymmetricMatrix,
}

struct Enumerator<'a> {
    x: &'a CovariateMatrix,
    phi: f64,
    balanced: bool,
    leaves: BTreeMap<Vec<i8>, CompensatedSum>,
}

impl Enumerator<'_> {
    fn explore(&mut self, state: WalkState, weight: f64) -> Result<()> {
        if state.alive.is_empty() {
            let key = state.z.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
            self.leaves.entry(key).or_default().add(weight);
            return Ok(());
        }
        if state.pivot.is_none() {
            let share = weight / state.alive.len() as f64;
            for &p in &state.alive {
                let mut next = state.clone();
                next.pivot = Some(p);
                self.explore(next, share)?;
            }
            return Ok(());
        }
        let u = if self.balanced {
            step_direction_balanced_kkt(&state, self.x, self.phi)?
        } else {
            step_direction_naive(&state, self.x, self.phi)?
        };
        let sizes = step_sizes(&state.z, &u)?;
        let p_plus = sizes.plus_probability();
        for (delta, hit, w) in [
            (sizes.plus, sizes.plus_hit, p_plus),
            (-sizes.minus, sizes.minus_hit, 1.0 - p_plus),
        ] {
            let mut next = state.clone();
            let frozen = apply_step(&mut next.z, &mut next.alive, &u, delta, hit);
            if frozen.iter().any(|&i| Some(i) == next.pivot) {
                next.pivot = None;
            }
            next.iteration += 1;
            self.explore(next, weight * w)?;
        }
        Ok(())
    }
}

/// Walks the full decision tree of the design.
pub fn enumerate_distribution(x: &CovariateMatrix, config: &DesignConfig) -> Result<DesignDistribution> {
    let n = x.n();
    if n > MAX_UNITS {
        return Err(Error::TooLarge { n, max: MAX_UNITS });
    }
    config.validate(n)?;
    let root = WalkState {
        z: config.initial_point(),
        alive: (0..n).collect(),
        pivot: None,
        factor: None,
        cov_sum: vec![0.0; x.d()],
        iteration: 0,
    };
    let mut e = Enumerator {
        x,
        phi: config.phi,
        balanced: config.balanced,
        leaves: BTreeMap::new(),
    };
    e.explore(root, 1.0)?;
    Ok(DesignDistribution {
        n,
        support: e.leaves.into_iter().map(|(k, s)| (k, s.value())).collect(),
    })
}

/// `Σ p(z)·f(z)` over the support.
pub fn exact_expectation(dist: &DesignDistribution, f: impl Fn(&[i8]) -> f64) -> f64 {
    let mut s = CompensatedSum::default();
    for (z, p) in &dist.support {
        s.add(p * f(z));
    }
    s.value()
}

pub fn exact_moments(dist: &DesignDistribution) -> ExactMoments {
    let n = dist.n;
    let mut mean = vec![CompensatedSum::default(); n];
    let mut cross = vec![CompensatedSum::default(); n * n];
    for (z, p) in &dist.support {
        for i in 0..n {
            mean[i].add(p * z[i] as f64);
            for j in 0..=i {
                cross[i * n + j].add(p * (z[i] * z[j]) as f64);
            }
        }
    }
    let mean: Vec<f64> = mean.iter().map(CompensatedSum::value).collect();
    let cross = SymmetricMatrix::from_fn(n, |i, j| cross[i * n + j].value());
    let cov = SymmetricMatrix::from_fn(n, |i, j| cross.get(i, j) - mean[i] * mean[j]);
    ExactMoments { mean, cov, cross }
}
