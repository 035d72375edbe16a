use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsw_core::estimators::compute_q;
use gsw_core::linalg::{chol_downdate, cholesky_factor};
use gsw_core::{stream, CovariateMatrix, DesignConfig, GswDesign};
use rand::Rng;
use std::hint::black_box;

fn covariates(n: usize, d: usize) -> CovariateMatrix {
    let mut rng = stream(1, 0);
    CovariateMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    group.sample_size(10);
    for n in [250, 500, 1000, 2000] {
        let x = covariates(n, 20);
        for balanced in [false, true] {
            let design = GswDesign::new(&x, DesignConfig::uniform(n, 0.5).balanced(balanced)).unwrap();
            let label = if balanced { "balanced" } else { "plain" };
            let mut k = 0;
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                b.iter(|| {
                    k += 1;
                    black_box(design.sample(k).unwrap())
                })
            });
        }
    }
    group.finish();
}

fn q_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_q");
    for n in [100, 400] {
        let x = covariates(n, 20);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| compute_q(x, 0.5).unwrap())
        });
    }
    group.finish();
}

fn downdate(c: &mut Criterion) {
    let mut group = c.benchmark_group("cholesky_downdate");
    for d in [20, 100] {
        let x = covariates(4 * d, d);
        let mut m = x.gram();
        for i in 0..d {
            m.set(i, i, m.get(i, i) + 1.0);
        }
        let factor = cholesky_factor(&m).unwrap();
        let row = x.row(0).to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| chol_downdate(&factor, black_box(&row)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sample, q_matrix, downdate);
criterion_main!(benches);
