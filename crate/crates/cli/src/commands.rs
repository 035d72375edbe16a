use crate::args::{
    CovariateArgs, DesignArgs, DesignKind, DiagnoseArgs, EstimateArgs, MomentSource, OracleArgs, SampleArgs,
};
use anyhow::{bail, Context, Result};
use gsw_core::baselines::{BernoulliDesign, GroupBalancedDesign, RerandBase, RerandConfig, RerandomizedDesign};
use gsw_core::diagnostics::{collect_draws, second_order_probabilities, spectral_errors, spectral_report};
use gsw_core::estimators::{
    compute_q, confidence_interval, estimate_ridge_loss, estimate_ridge_loss_nonuniform,
    estimate_ridge_loss_regression, ht_estimate, OutcomeData,
};
use gsw_core::io::report::{matrix_rows, DiagnoseReport, EstimateReport, IntervalRow, OracleReport, SupportRow};
use gsw_core::io::{
    preprocess, read_assignments, read_column, read_csv, read_probabilities, write_assignments, write_json,
    RunManifest, Schema,
};
use gsw_core::oracle::invariants::{check_invariants, OutcomeTable};
use gsw_core::oracle::{enumerate_distribution, exact_moments};
use gsw_core::{stream, CovariateMatrix, Design, DesignConfig, GswDesign};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

fn load_covariates(args: &CovariateArgs) -> Result<CovariateMatrix> {
    let schema = Schema {
        id_column: args.id_column.clone(),
        ..Schema::default()
    };
    let ds = read_csv(&args.covariates, &schema)
        .with_context(|| format!("reading covariates from {}", args.covariates.display()))?;
    Ok(preprocess(&ds.x, args.preprocess)?)
}

fn walk_config(x: &CovariateMatrix, phi: f64, probabilities: &str, balanced: bool, seed: u64) -> Result<DesignConfig> {
    let pi = read_probabilities(probabilities, x.n())?;
    Ok(DesignConfig::with_probabilities(phi, pi).balanced(balanced).seed(seed))
}

fn build_design<'a>(x: &'a CovariateMatrix, args: &DesignArgs, phi: f64, seed: u64) -> Result<Box<dyn Design + 'a>> {
    let uniform_only = |what: &str| -> Result<()> {
        if args.probabilities != "uniform" {
            bail!(gsw_core::Error::InvalidConfig(format!(
                "the {what} design only supports uniform probabilities"
            )));
        }
        Ok(())
    };
    if args.balanced && args.design != DesignKind::Gsw {
        bail!(gsw_core::Error::InvalidConfig(
            "--balanced applies to the gsw design only".into()
        ));
    }
    Ok(match args.design {
        DesignKind::Gsw => Box::new(GswDesign::new(
            x,
            walk_config(x, phi, &args.probabilities, args.balanced, seed)?,
        )?),
        DesignKind::Bernoulli => Box::new(BernoulliDesign::new(read_probabilities(&args.probabilities, x.n())?)?),
        DesignKind::BalancedRandom => {
            uniform_only("balanced-random")?;
            Box::new(GroupBalancedDesign::new(x.n())?)
        }
        DesignKind::Rerand => {
            uniform_only("rerand")?;
            let cfg = RerandConfig {
                criterion_fraction: args.rerand_fraction,
                max_draws: args.max_draws,
                base: RerandBase::Bernoulli,
            };
            Box::new(RerandomizedDesign::new(x, cfg)?)
        }
    })
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    let x = load_covariates(&args.input)?;
    if args.reps == 0 {
        bail!(gsw_core::Error::InvalidConfig("--reps must be positive".into()));
    }
    let mut manifest = RunManifest::new("sample", args.seed, serde_json::to_value(args)?);
    manifest.record_input(&args.input.covariates)?;
    if args.design.probabilities != "uniform" {
        manifest.record_input(Path::new(&args.design.probabilities))?;
    }

    let mut replicates = Vec::with_capacity(args.reps);
    let mut traces = Vec::new();
    if args.trace && args.design.design == DesignKind::Gsw {
        let cfg = walk_config(
            &x,
            args.phi,
            &args.design.probabilities,
            args.design.balanced,
            args.seed,
        )?;
        let design = GswDesign::new(&x, cfg)?;
        for k in 0..args.reps {
            let a = design.sample_traced(&mut stream(args.seed, k as u64))?;
            replicates.push(a.z);
            traces.push(a.trace.unwrap_or_default());
        }
    } else {
        if args.trace {
            bail!(gsw_core::Error::InvalidConfig(
                "--trace applies to the gsw design only".into()
            ));
        }
        let design = build_design(&x, &args.design, args.phi, args.seed)?;
        for k in 0..args.reps {
            replicates.push(design.draw(&mut stream(args.seed, k as u64))?.z);
        }
    }

    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_assignments(BufWriter::new(file), &replicates)?;
    manifest.record_output(&args.out)?;
    if args.trace {
        let path = args.out.with_extension("trace.json");
        write_json(&path, &traces)?;
        manifest.record_output(&path)?;
    }
    manifest.finish();
    write_json(&args.out.with_extension("manifest.json"), &manifest)?;
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let x = load_covariates(&args.input)?;
    let grid = args.design.design == DesignKind::Gsw;
    let phis: Vec<Option<f64>> = if grid {
        args.phi.iter().map(|&p| Some(p)).collect()
    } else {
        vec![None]
    };
    let mut reports = Vec::new();
    for phi in phis {
        let design = build_design(&x, &args.design, phi.unwrap_or(1.0), args.seed)?;
        let draws = collect_draws(design.as_ref(), args.reps, args.seed)?;
        let mom = draws.moments(args.seed);
        let spec = spectral_report(&mom, &x)?;
        let se = spectral_errors(&draws, &mom, &x)?;
        reports.push(DiagnoseReport {
            design: design.name().into(),
            phi,
            n: x.n(),
            d: x.d(),
            replicates: args.reps,
            seed: args.seed,
            lambda_z: spec.lambda_z,
            lambda_z_se: se.lambda_z_se,
            lambda_xz: spec.lambda_xz,
            lambda_xz_se: se.lambda_xz_se,
            mean_sq_imbalance: spec.mean_sq_imbalance,
            group_size_msq: spec.group_size_msq,
            min_pair_prob: second_order_probabilities(&mom).min(),
        });
    }
    if reports.len() == 1 {
        emit(args.out.as_deref(), &reports[0])
    } else {
        emit(args.out.as_deref(), &reports)
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let x = load_covariates(&args.input)?;
    let n = x.n();
    let y = read_column(&args.outcomes, &args.outcome_column)?;
    let columns = read_assignments(&args.assignment)?;
    let z = args
        .replicate
        .checked_sub(1)
        .and_then(|k| columns.get(k))
        .cloned()
        .ok_or_else(|| {
            gsw_core::Error::InvalidConfig(format!(
                "replicate {} out of range 1..={}",
                args.replicate,
                columns.len()
            ))
        })?;
    let data = OutcomeData::new(y, z)?;
    if data.n() != n {
        bail!(gsw_core::Error::DimensionMismatch {
            expected: n,
            found: data.n()
        });
    }
    let cfg = walk_config(&x, args.phi, &args.probabilities, args.balanced, args.seed)?;
    let pi = cfg.probabilities.clone();
    let tau_hat = ht_estimate(&data, &pi);

    let moments = match args.moments {
        MomentSource::Regression => None,
        MomentSource::Oracle => {
            let m = exact_moments(&enumerate_distribution(&x, &cfg)?);
            Some((m.mean, m.cross))
        }
        MomentSource::MonteCarlo(r) => {
            let design = GswDesign::new(&x, cfg.clone())?;
            let m = collect_draws(&design, r, args.seed)?.moments(args.seed);
            Some((m.mean_hat, m.cross_hat))
        }
    };
    let loss = match &moments {
        None => estimate_ridge_loss_regression(&x, args.phi, &data)?,
        Some((mean, cross)) => {
            let q = compute_q(&x, args.phi)?;
            if cfg.is_uniform() {
                estimate_ridge_loss(&q, &data, cross)?
            } else {
                estimate_ridge_loss_nonuniform(&q, &data, &pi, cross, mean)?
            }
        }
    };
    let intervals = args
        .alpha
        .iter()
        .map(|&a| confidence_interval(tau_hat, loss.value.max(0.0), n, a).map(IntervalRow::from))
        .collect::<Result<Vec<_>, _>>()?;
    emit(
        args.out.as_deref(),
        &EstimateReport {
            n,
            phi: args.phi,
            tau_hat,
            ridge_loss: loss.value,
            method: loss.method,
            moments: args.moments.to_string(),
            floored_denominators: loss.floored,
            intervals,
        },
    )
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let x = load_covariates(&args.input)?;
    let cfg = walk_config(&x, args.phi, &args.probabilities, args.balanced, args.seed)?;
    let dist = enumerate_distribution(&x, &cfg)?;
    let outcomes = match &args.potential_outcomes {
        None => Vec::new(),
        Some(p) => vec![OutcomeTable {
            a: read_column(p, "a")?,
            b: read_column(p, "b")?,
        }],
    };
    let checks = check_invariants(&x, &cfg, &dist, &outcomes, args.seed)?;
    let mom = exact_moments(&dist);
    emit(
        args.out.as_deref(),
        &OracleReport {
            n: x.n(),
            phi: args.phi,
            balanced: args.balanced,
            all_passed: checks.iter().all(|c| c.passed),
            support: dist
                .support
                .iter()
                .map(|(z, p)| SupportRow {
                    z: z.clone(),
                    probability: *p,
                })
                .collect(),
            mean: mom.mean,
            cov: matrix_rows(&mom.cov),
            checks,
        },
    )
}
