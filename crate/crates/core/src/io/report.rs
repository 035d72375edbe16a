//! JSON report shapes. Field names are part of the command-line contract.

use crate::estimators::{ConfidenceInterval, RidgeLossMethod};
use crate::linalg::SymmetricMatrix;
use crate::oracle::invariants::InvariantCheck;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub design: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi: Option<f64>,
    pub n: usize,
    pub d: usize,
    pub replicates: usize,
    pub seed: u64,
    pub lambda_z: f64,
    pub lambda_z_se: f64,
    pub lambda_xz: f64,
    pub lambda_xz_se: f64,
    pub mean_sq_imbalance: f64,
    pub group_size_msq: f64,
    pub min_pair_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub radius: f64,
}

impl From<ConfidenceInterval> for IntervalRow {
    fn from(ci: ConfidenceInterval) -> Self {
        Self {
            alpha: ci.alpha,
            lower: ci.lower(),
            upper: ci.upper(),
            radius: ci.radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub phi: f64,
    pub tau_hat: f64,
    pub ridge_loss: f64,
    pub method: RidgeLossMethod,
    /// `mc:R`, `oracle` or `regression`.
    pub moments: String,
    /// Pair denominators raised to the positivity floor.
    pub floored_denominators: usize,
    pub intervals: Vec<IntervalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRow {
    pub z: Vec<i8>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub phi: f64,
    pub balanced: bool,
    pub support: Vec<SupportRow>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub checks: Vec<InvariantCheck>,
    pub all_passed: bool,
}

/// Dense row-by-row copy for serialization.
pub fn matrix_rows(m: &SymmetricMatrix) -> Vec<Vec<f64>> {
    (0..m.order()).map(|i| m.row(i).to_vec()).collect()
}
