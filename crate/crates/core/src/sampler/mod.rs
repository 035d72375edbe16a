//! The Gram–Schmidt Walk sampler.
//!
//! A walk starts at `z = 2π − 𝟏`, repeatedly moves along the minimum-norm
//! direction of the augmented covariates and stops once every coordinate
//! has reached ±1. The fast path keeps a Cholesky factor of
//! `M = X_SᵀX_S + λI` over the alive non-pivot units `S`, so each iteration
//! costs `O(|S|·d + d²)`.
//!
//! Random numbers are consumed in a fixed order: one `gen_range(0..|alive|)`
//! whenever a pivot is (re)selected from the ascending alive list, then one
//! uniform `f64` per iteration choosing the sign of the step.

mod direction;
mod step;

pub use direction::{
    regularizer, step_direction_balanced, step_direction_balanced_kkt, step_direction_fast, step_direction_naive,
    CONSTRAINT_TOL,
};
pub(crate) use step::apply_step;
pub use step::{step_sizes, StepSizes, SNAP_TOL};

use crate::covariates::CovariateMatrix;
use crate::design::{Assignment, Design, TraceStep};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, CholeskyFactor, LinalgError, SymmetricMatrix};
use crate::rng::{stream, RandomStream};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[cfg(debug_assertions)]
const FACTOR_CHECK_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub phi: f64,
    pub probabilities: Vec<f64>,
    pub balanced: bool,
    pub seed: u64,
}

impl DesignConfig {
    /// Uniform `π = ½` for `n` units.
    pub fn uniform(n: usize, phi: f64) -> Self {
        Self {
            phi,
            probabilities: vec![0.5; n],
            balanced: false,
            seed: 0,
        }
    }

    pub fn with_probabilities(phi: f64, probabilities: Vec<f64>) -> Self {
        Self {
            phi,
            probabilities,
            balanced: false,
            seed: 0,
        }
    }

    pub fn balanced(mut self, on: bool) -> Self {
        self.balanced = on;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_uniform(&self) -> bool {
        self.probabilities.iter().all(|&p| p == 0.5)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "phi must lie in (0, 1], got {}",
                self.phi
            )));
        }
        if self.probabilities.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.probabilities.len(),
            });
        }
        if let Some((i, p)) = self
            .probabilities
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::InvalidConfig(format!(
                "probability for unit {i} must lie in (0, 1), got {p}"
            )));
        }
        Ok(())
    }

    /// Starting point `2π − 𝟏`.
    pub fn initial_point(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| 2.0 * p - 1.0).collect()
    }
}

/// Fractional assignment plus the bookkeeping the fast path maintains.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub z: Vec<f64>,
    /// Alive units in ascending order.
    pub alive: Vec<usize>,
    pub pivot: Option<usize>,
    /// Factor of `M` over the alive non-pivot units; `None` when `φ = 1`.
    pub factor: Option<CholeskyFactor>,
    /// Sum of the alive non-pivot covariate rows.
    pub cov_sum: Vec<f64>,
    pub iteration: usize,
}

impl WalkState {
    /// Builds a state from scratch, factoring `M` directly.
    pub fn from_parts(
        x: &CovariateMatrix,
        phi: f64,
        z: Vec<f64>,
        alive: Vec<usize>,
        pivot: Option<usize>,
    ) -> Result<Self> {
        let mut s = Self {
            z,
            alive,
            pivot,
            factor: None,
            cov_sum: vec![0.0; x.d()],
            iteration: 0,
        };
        s.alive.sort_unstable();
        s.rebuild(x, phi).map_err(Error::from)?;
        Ok(s)
    }

    /// Alive units other than the pivot.
    pub fn others(&self) -> impl Iterator<Item = usize> + '_ {
        let p = self.pivot;
        self.alive.iter().copied().filter(move |&i| Some(i) != p)
    }

    pub fn is_done(&self) -> bool {
        self.alive.is_empty()
    }

    /// `M` for the current alive non-pivot set, formed explicitly.
    pub fn target_matrix(&self, x: &CovariateMatrix, phi: f64) -> SymmetricMatrix {
        let lambda = regularizer(phi, x.xi());
        let mut m = vec![0.0; x.d() * x.d()];
        let d = x.d();
        for i in self.others() {
            let r = x.row(i);
            for p in 0..d {
                for q in 0..=p {
                    m[p * d + q] += r[p] * r[q];
                }
            }
        }
        SymmetricMatrix::from_fn(d, |p, q| m[p * d + q] + if p == q { lambda } else { 0.0 })
    }

    fn rebuild(&mut self, x: &CovariateMatrix, phi: f64) -> Result<(), LinalgError> {
        let mut sum = vec![0.0; x.d()];
        for i in self.others() {
            for (s, v) in sum.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        self.cov_sum = sum;
        self.factor = if phi < 1.0 {
            Some(cholesky_factor(&self.target_matrix(x, phi))?)
        } else {
            None
        };
        Ok(())
    }

    /// Removes rows from `M` after they left the alive non-pivot set,
    /// refactoring from scratch if a downdate breaks positive definiteness.
    fn remove_rows(&mut self, x: &CovariateMatrix, phi: f64, rows: &[usize]) -> Result<()> {
        for &i in rows {
            for (s, v) in self.cov_sum.iter_mut().zip(x.row(i)) {
                *s -= v;
            }
        }
        let Some(factor) = self.factor.as_mut() else {
            return Ok(());
        };
        let mut failed = false;
        for &i in rows {
            let mut v = x.row(i).to_vec();
            if factor.downdate_in_place(&mut v).is_err() {
                failed = true;
                break;
            }
        }
        if failed {
            self.rebuild(x, phi).map_err(Error::FatalNumerical)?;
        }
        Ok(())
    }
}

/// The Gram–Schmidt Walk design for a fixed covariate matrix.
#[derive(Debug, Clone)]
pub struct GswDesign<'a> {
    x: &'a CovariateMatrix,
    config: DesignConfig,
    start: WalkState,
}

impl<'a> GswDesign<'a> {
    pub fn new(x: &'a CovariateMatrix, config: DesignConfig) -> Result<Self> {
        config.validate(x.n())?;
        let start = WalkState::from_parts(x, config.phi, config.initial_point(), (0..x.n()).collect(), None)?;
        Ok(Self { x, config, start })
    }

    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn covariates(&self) -> &CovariateMatrix {
        self.x
    }

    pub fn walk(&self) -> Walk<'_, 'a> {
        Walk {
            design: self,
            state: self.start.clone(),
            trace: None,
        }
    }

    /// Draws sample `index` from the stream `(seed, index)`.
    pub fn sample(&self, index: u64) -> Result<Assignment> {
        self.draw(&mut stream(self.config.seed, index))
    }

    pub fn sample_traced(&self, rng: &mut RandomStream) -> Result<Assignment> {
        let mut walk = self.walk();
        walk.trace = Some(Vec::new());
        walk.run(rng)
    }
}

impl Design for GswDesign<'_> {
    fn n(&self) -> usize {
        self.x.n()
    }

    fn draw(&self, rng: &mut RandomStream) -> Result<Assignment> {
        self.walk().run(rng)
    }

    fn name(&self) -> &'static str {
        "gsw"
    }
}

/// One run of the walk, advanced an iteration at a time.
pub struct Walk<'d, 'a> {
    design: &'d GswDesign<'a>,
    state: WalkState,
    trace: Option<Vec<TraceStep>>,
}

impl Walk<'_, '_> {
    pub fn state(&self) -> &WalkState {
        &self.state
    }

    /// Selects a pivot if needed and returns the direction for the next
    /// iteration, or `None` once every unit is frozen.
    pub fn next_direction(&mut self, rng: &mut RandomStream) -> Result<Option<Vec<f64>>> {
        if self.state.is_done() {
            return Ok(None);
        }
        let (x, cfg) = (self.design.x, &self.design.config);
        if self.state.pivot.is_none() {
            let p = self.state.alive[rng.gen_range(0..self.state.alive.len())];
            self.state.pivot = Some(p);
            self.state.remove_rows(x, cfg.phi, &[p])?;
        }
        let u = if cfg.balanced {
            step_direction_balanced(&self.state, x, cfg.phi)?
        } else {
            step_direction_fast(&self.state, x, cfg.phi)?
        };
        Ok(Some(u))
    }

    /// Takes a randomly signed maximal step along `u`.
    pub fn take_step(&mut self, u: &[f64], rng: &mut RandomStream) -> Result<TraceStep> {
        let (x, phi) = (self.design.x, self.design.config.phi);
        let sizes = step_sizes(&self.state.z, u)?;
        let (delta, hit) = if rng.gen::<f64>() < sizes.plus_probability() {
            (sizes.plus, sizes.plus_hit)
        } else {
            (-sizes.minus, sizes.minus_hit)
        };
        let pivot = self.state.pivot.ok_or(Error::NoPivot)?;
        let frozen = apply_step(&mut self.state.z, &mut self.state.alive, u, delta, hit);
        let mut leaving = Vec::with_capacity(frozen.len());
        for &i in &frozen {
            if i == pivot {
                self.state.pivot = None;
            } else {
                leaving.push(i);
            }
        }
        self.state.remove_rows(x, phi, &leaving)?;
        self.state.iteration += 1;
        #[cfg(debug_assertions)]
        self.check_factor();
        Ok(TraceStep { pivot, delta, frozen })
    }

    #[cfg(debug_assertions)]
    fn check_factor(&self) {
        if !self.state.iteration.is_multiple_of(FACTOR_CHECK_EVERY) {
            return;
        }
        if let Some(f) = &self.state.factor {
            let target = self.state.target_matrix(self.design.x, self.design.config.phi);
            let err = f.reconstruct().sub(&target).frobenius_norm() / target.frobenius_norm();
            debug_assert!(err <= 1e-6, "maintained factor drifted: relative error {err}");
        }
    }

    pub fn run(mut self, rng: &mut RandomStream) -> Result<Assignment> {
        while let Some(u) = self.next_direction(rng)? {
            let step = self.take_step(&u, rng)?;
            if let Some(t) = self.trace.as_mut() {
                t.push(step);
            }
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> Assignment {
        debug_assert!(self.state.is_done());
        Assignment {
            z: self.state.z.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect(),
            trace: self.trace,
        }
    }
}

/// One draw from the design with the given stream.
pub fn sample_assignment(x: &CovariateMatrix, config: &DesignConfig, rng: &mut RandomStream) -> Result<Assignment> {
    GswDesign::new(x, config.clone())?.draw(rng)
}
