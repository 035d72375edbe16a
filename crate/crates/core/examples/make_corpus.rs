//! Regenerates `tests/data/oracle_corpus.json`.
//!
//! cargo run -p gsw-core --example make_corpus > crates/core/tests/data/oracle_corpus.json

use gsw_core::oracle::invariants::OutcomeTable;
use gsw_core::oracle::CorpusInstance;
use gsw_core::stream;
use rand::Rng;

const PHIS: [f64; 4] = [0.2, 0.5, 0.9, 1.0];
const SKEWED: [f64; 6] = [0.3, 0.6, 0.45, 0.7, 0.55, 0.35];

fn rounded(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo..hi) * 1000.0).round() / 1000.0
}

fn main() {
    let mut rng = stream(20_240_601, 0);
    let mut corpus = Vec::new();
    for n in 2..=6 {
        for d in 1..=3 {
            let covariates: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rounded(&mut rng, -1.5, 1.5)).collect())
                .collect();
            let b: Vec<f64> = (0..n).map(|_| rounded(&mut rng, -2.0, 2.0)).collect();
            let outcomes = vec![
                OutcomeTable {
                    a: (0..n).map(|_| rounded(&mut rng, -2.0, 2.0)).collect(),
                    b: b.clone(),
                },
                OutcomeTable {
                    a: b.iter().map(|v| v + 1.0).collect(),
                    b,
                },
            ];
            for phi in PHIS {
                for (label, probabilities) in [("uniform", vec![0.5; n]), ("skewed", SKEWED[..n].to_vec())] {
                    corpus.push(CorpusInstance {
                        name: format!("n{n}-d{d}-phi{phi}-{label}"),
                        covariates: covariates.clone(),
                        phi,
                        probabilities,
                        balanced: false,
                        outcomes: outcomes.clone(),
                    });
                }
            }
        }
    }
    println!("{}", serde_json::to_string_pretty(&corpus).expect("corpus serializes"));
}
