use clap::{Args, Parser, Subcommand, ValueEnum};
use gsw_core::io::Preprocessing;
use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(name = "gsw", version, about = "Covariate-balancing experimental designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw assignments and write them as CSV, one column per replicate.
    Sample(SampleArgs),
    /// Monte Carlo spectral diagnostics of a design.
    Diagnose(DiagnoseArgs),
    /// Treatment effect estimate and confidence intervals.
    Estimate(EstimateArgs),
    /// Exact design law and invariant table for n <= 8.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Gsw,
    Bernoulli,
    BalancedRandom,
    Rerand,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CovariateArgs {
    /// CSV with a header row; every column except the id column is a covariate.
    #[arg(long)]
    pub covariates: PathBuf,
    /// Applied before the design sees the covariates.
    #[arg(long, default_value = "none")]
    pub preprocess: Preprocessing,
    #[arg(long, default_value = "id")]
    pub id_column: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DesignArgs {
    #[arg(long, value_enum, default_value = "gsw")]
    pub design: DesignKind,
    /// Also fix the number of treated units (walk design only).
    #[arg(long)]
    pub balanced: bool,
    /// `uniform`, or a CSV file with a `pi` column.
    #[arg(long, default_value = "uniform")]
    pub probabilities: String,
    /// Rerandomization acceptance fraction of the expected imbalance.
    #[arg(long, default_value_t = 0.5)]
    pub rerand_fraction: f64,
    /// Rerandomization draws before giving up.
    #[arg(long, default_value_t = 100_000)]
    pub max_draws: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: CovariateArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    /// Robustness-balance trade-off in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-iteration walk traces as JSON next to the output.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: CovariateArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    /// One value, or a comma-separated grid.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub phi: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    MonteCarlo(usize),
    Oracle,
    Regression,
}

impl FromStr for MomentSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "regression" => Ok(Self::Regression),
            _ => s
                .strip_prefix("mc:")
                .and_then(|r| r.parse().ok())
                .filter(|&r: &usize| r >= 2)
                .map(Self::MonteCarlo)
                .ok_or_else(|| format!("expected mc:R with R >= 2, oracle or regression; got {s:?}")),
        }
    }
}

impl fmt::Display for MomentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MonteCarlo(r) => write!(f, "mc:{r}"),
            Self::Oracle => f.write_str("oracle"),
            Self::Regression => f.write_str("regression"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: CovariateArgs,
    /// CSV holding the observed outcomes.
    #[arg(long)]
    pub outcomes: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome_column: String,
    /// Assignments CSV as written by `gsw sample`.
    #[arg(long)]
    pub assignment: PathBuf,
    /// 1-based column of the assignments file to use.
    #[arg(long, default_value_t = 1)]
    pub replicate: usize,
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    #[arg(long)]
    pub balanced: bool,
    #[arg(long, default_value = "uniform")]
    pub probabilities: String,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    /// `mc:R`, `oracle` or `regression`.
    #[arg(long, default_value = "mc:10000")]
    pub moments: MomentSource,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: CovariateArgs,
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    #[arg(long)]
    pub balanced: bool,
    #[arg(long, default_value = "uniform")]
    pub probabilities: String,
    /// CSV with potential outcome columns `a` (treated) and `b` (control).
    #[arg(long)]
    pub potential_outcomes: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
