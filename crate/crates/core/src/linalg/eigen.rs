use super::{LinalgError, SymmetricMatrix};

const MAX_SWEEPS: usize = 100;
const OFF_TOL: f64 = 1e-11;

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is stored at `eigenvectors[i * order + k]`.
    pub eigenvectors: Vec<f64>,
    order: usize,
}

impl Spectrum {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.order).map(|i| self.eigenvectors[i * self.order + k]).collect()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.order;
        SymmetricMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.eigenvectors[i * n + k] * self.eigenvalues[k] * self.eigenvectors[j * n + k])
                .sum()
        })
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eigen(a: &SymmetricMatrix) -> Result<Spectrum, LinalgError> {
    let n = a.order();
    let mut m = a.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = OFF_TOL * a.frobenius_norm();
    let off_max = |m: &[f64]| {
        let mut worst = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                worst = worst.max(m[p * n + q].abs());
            }
        }
        worst
    };

    let mut sweeps = 0;
    while off_max(&m) > tol {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let eigenvalues = idx.iter().map(|&k| m[k * n + k]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new, &old) in idx.iter().enumerate() {
        for i in 0..n {
            eigenvectors[i * n + new] = v[i * n + old];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        order: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymmetricMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn check_pairs(a: &SymmetricMatrix, s: &Spectrum) {
        let n = a.order();
        let norm = a.frobenius_norm();
        for k in 0..n {
            let vk = s.vector(k);
            let av = a.matvec(&vk);
            for i in 0..n {
                assert!((av[i] - s.eigenvalues[k] * vk[i]).abs() <= 1e-7 * norm.max(1.0));
            }
            for l in 0..n {
                let g = crate::linalg::dot(&vk, &s.vector(l));
                let e = if k == l { 1.0 } else { 0.0 };
                assert!((g - e).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn diagonal_sorted() {
        let s = sym_eigen(&SymmetricMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert_eq!(s.vector(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = SymmetricMatrix::from_full(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = sym_eigen(&a).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-14);
        check_pairs(&a, &s);
    }

    #[test]
    fn random_reconstruction() {
        let a = random_sym(8, 11);
        let s = sym_eigen(&a).unwrap();
        let r = s.reconstruct();
        for i in 0..8 {
            for j in 0..8 {
                assert!((r.get(i, j) - a.get(i, j)).abs() <= 1e-7);
            }
        }
        check_pairs(&a, &s);
    }

    #[test]
    fn zero_and_empty() {
        let s = sym_eigen(&SymmetricMatrix::zeros(3)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0; 3]);
        let s = sym_eigen(&SymmetricMatrix::zeros(0)).unwrap();
        assert!(s.eigenvalues.is_empty());
        assert_eq!(s.max(), 0.0);
    }

    proptest! {
        #[test]
        fn prop_trace_and_pairs(n in 1usize..16, seed in any::<u64>()) {
            let a = random_sym(n, seed);
            let s = sym_eigen(&a).unwrap();
            let tr = a.trace();
            let sum: f64 = s.eigenvalues.iter().sum();
            prop_assert!((sum - tr).abs() <= 1e-8 * tr.abs().max(1.0));
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            check_pairs(&a, &s);
        }
    }
}
