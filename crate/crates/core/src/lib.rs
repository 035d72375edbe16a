//! Gram–Schmidt Walk experimental design.
//!
//! Samples treatment assignments that balance covariates while staying
//! robust, enumerates the exact design law on small instances, computes
//! Horvitz–Thompson estimates with conservative confidence intervals, and
//! characterizes designs by Monte Carlo spectral diagnostics.

pub mod baselines;
pub mod covariates;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod sampler;

pub use covariates::CovariateMatrix;
pub use design::{Assignment, Design, TraceStep};
pub use error::{Error, Result};
pub use rng::{stream, RandomStream};
pub use sampler::{sample_assignment, DesignConfig, GswDesign};
