use crate::linalg::LinalgError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no pivot is set")]
    NoPivot,
    #[error("step direction is zero on every alive coordinate")]
    ZeroDirection,
    #[error("reference linear system is singular")]
    SingularSystem,
    #[error("balance constraint cannot be enforced at iteration {iteration}")]
    DegenerateConstraint { iteration: usize },
    #[error("factor maintenance failed after refactorization: {0}")]
    FatalNumerical(LinalgError),
    #[error("exact enumeration supports n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },
    #[error("treatment arm {arm} is empty")]
    EmptyArm { arm: &'static str },
    #[error("group-balanced design needs an even unit count, got {n}")]
    OddN { n: usize },
    #[error("no acceptable assignment within {draws} draws")]
    ExhaustedDraws { draws: usize },
    #[error("every covariate direction was dropped as degenerate")]
    DegenerateCovariates,
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Linalg(_)
                | Error::FatalNumerical(_)
                | Error::SingularSystem
                | Error::DegenerateConstraint { .. }
                | Error::ZeroDirection
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
