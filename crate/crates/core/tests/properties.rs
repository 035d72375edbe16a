use gsw_core::diagnostics::mc_moments;
use gsw_core::estimators::{compute_q, confidence_interval, estimate_ridge_loss, ht_estimate, OutcomeData};
use gsw_core::io::{preprocess, read_assignments, read_csv, write_assignments, Preprocessing, Schema};
use gsw_core::oracle::enumerate_distribution;
use gsw_core::oracle::invariants::{check_invariants, OutcomeTable};
use gsw_core::{stream, CovariateMatrix, Design, DesignConfig, GswDesign};
use proptest::prelude::*;
use std::io::Write;

fn instance(max_n: usize) -> impl Strategy<Value = (CovariateMatrix, f64, Vec<f64>, OutcomeTable)> {
    (2..=max_n, 1..=2usize).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-2.0..2.0f64, n * d),
            0.1..=1.0f64,
            prop::collection::vec(0.2..0.8f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(data, phi, pi, a, b)| {
                (
                    CovariateMatrix::new(n, d, data).unwrap(),
                    phi,
                    pi,
                    OutcomeTable { a, b },
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_law_satisfies_every_invariant((x, phi, pi, table) in instance(5), uniform in any::<bool>()) {
        let cfg = if uniform {
            DesignConfig::uniform(x.n(), phi)
        } else {
            DesignConfig::with_probabilities(phi, pi)
        };
        let dist = enumerate_distribution(&x, &cfg).unwrap();
        for c in check_invariants(&x, &cfg, &dist, &[table], 1).unwrap() {
            prop_assert!(c.passed, "{:?}", c);
        }
    }

    #[test]
    fn sampling_is_a_function_of_seed_and_index((x, phi, pi, _) in instance(12), seed in any::<u64>(), k in 0..1000u64) {
        let design = GswDesign::new(&x, DesignConfig::with_probabilities(phi, pi).seed(seed)).unwrap();
        let a = design.sample(k).unwrap();
        prop_assert_eq!(&a, &design.sample(k).unwrap());
        prop_assert_eq!(&a, &design.draw(&mut stream(seed, k)).unwrap());
    }
}

#[test]
fn csv_to_interval_pipeline() {
    let mut rng = stream(11, 0);
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "id,age,income,flag").unwrap();
    for i in 0..40 {
        use rand::Rng;
        writeln!(
            f,
            "u{i},{},{},{}",
            rng.gen_range(18..70),
            rng.gen_range(1.0..9.0),
            rng.gen_range(0..2)
        )
        .unwrap();
    }
    let ds = read_csv(f.path(), &Schema::default()).unwrap();
    assert_eq!(ds.ids.as_ref().unwrap()[3], "u3");
    let x = preprocess(&ds.x, Preprocessing::Whiten).unwrap();
    assert_eq!((x.n(), x.d()), (40, 3));

    let design = GswDesign::new(&x, DesignConfig::uniform(40, 0.3).seed(5)).unwrap();
    let draws: Vec<Vec<i8>> = (0..5).map(|k| design.sample(k).unwrap().z).collect();
    let mut out = tempfile::NamedTempFile::new().unwrap();
    write_assignments(&mut out, &draws).unwrap();
    assert_eq!(read_assignments(out.path()).unwrap(), draws);

    let a: Vec<f64> = (0..40).map(|i| 2.0 + x.row(i)[0]).collect();
    let b: Vec<f64> = (0..40).map(|i| x.row(i)[0]).collect();
    let data = OutcomeData::observe(&a, &b, &draws[0]);
    let mom = mc_moments(&design, 4000, 6).unwrap();
    let loss = estimate_ridge_loss(&compute_q(&x, 0.3).unwrap(), &data, &mom.cross_hat).unwrap();
    let ci = confidence_interval(ht_estimate(&data, &[0.5; 40]), loss.value.max(0.0), 40, 0.05).unwrap();
    assert!(ci.radius.is_finite() && ci.radius > 0.0);
}
