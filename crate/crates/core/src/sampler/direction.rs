use super::WalkState;
use crate::covariates::CovariateMatrix;
use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky_factor, dot, lu_solve, CholeskyFactor, LinalgError, SymmetricMatrix};

/// Below this magnitude the balance constraint is treated as unenforceable.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// `ξ²φ/(1−φ)`, the ridge shift of the maintained `d × d` matrix.
pub fn regularizer(phi: f64, xi: f64) -> f64 {
    xi * xi * phi / (1.0 - phi)
}

fn pivot_and_unit(state: &WalkState) -> Result<(usize, Vec<f64>)> {
    let p = state.pivot.ok_or(Error::NoPivot)?;
    let mut u = vec![0.0; state.z.len()];
    u[p] = 1.0;
    Ok((p, u))
}

fn factor_of(state: &WalkState) -> Result<&CholeskyFactor> {
    state
        .factor
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("walk state carries no factor for phi < 1".into()))
}

/// Minimum-norm direction from the maintained factor.
///
/// The non-pivot alive coordinates are `−⟨x_i, M⁻¹x_p⟩`: the textbook form
/// `−λ⁻¹ X (x_p − M⁻¹XᵀX x_p)` simplifies to this because
/// `x_p − M⁻¹(M − λI)x_p = λM⁻¹x_p`, and the short form avoids the
/// cancellation in the bracket.
pub fn step_direction_fast(state: &WalkState, x: &CovariateMatrix, phi: f64) -> Result<Vec<f64>> {
    let (p, mut u) = pivot_and_unit(state)?;
    if phi >= 1.0 || x.d() == 0 {
        return Ok(u);
    }
    let w = chol_solve(factor_of(state)?, x.row(p))?;
    for i in state.others() {
        u[i] = -dot(x.row(i), &w);
    }
    Ok(u)
}

/// Minimum-norm direction subject to `⟨𝟏, u⟩ = 0`.
pub fn step_direction_balanced(state: &WalkState, x: &CovariateMatrix, phi: f64) -> Result<Vec<f64>> {
    let (p, mut u) = pivot_and_unit(state)?;
    let k = state.alive.len().saturating_sub(1);
    if k == 0 {
        return Ok(u);
    }
    if phi >= 1.0 {
        for i in state.others() {
            u[i] = -1.0 / k as f64;
        }
        return Ok(u);
    }
    let factor = factor_of(state)?;
    let wp = chol_solve(factor, x.row(p))?;
    let ws = chol_solve(factor, &state.cov_sum)?;
    let scale = 1.0 / (2.0 * phi);
    let parts: Vec<(usize, f64, f64)> = state
        .others()
        .map(|i| {
            let xi = x.row(i);
            (i, dot(xi, &wp), scale * (1.0 - dot(xi, &ws)))
        })
        .collect();
    let sum_a: f64 = parts.iter().map(|t| t.1).sum();
    let sum_r: f64 = parts.iter().map(|t| t.2).sum();
    if sum_r.abs() < CONSTRAINT_TOL {
        return Err(Error::DegenerateConstraint {
            iteration: state.iteration,
        });
    }
    let nu = (1.0 - sum_a) / sum_r;
    for (i, a, r) in parts {
        u[i] = -(a + nu * r);
    }
    Ok(u)
}

/// Explicit augmented columns `(√φ e_i ; ξ⁻¹√(1−φ) x_i)` as an
/// `(n+d) × cols.len()` row-major matrix.
fn augmented(x: &CovariateMatrix, phi: f64, cols: &[usize]) -> Vec<f64> {
    let (n, d, k) = (x.n(), x.d(), cols.len());
    let sp = phi.sqrt();
    let sc = (1.0 - phi).sqrt() / x.xi();
    let mut b = vec![0.0; (n + d) * k];
    for (c, &i) in cols.iter().enumerate() {
        b[i * k + c] = sp;
        for (r, v) in x.row(i).iter().enumerate() {
            b[(n + r) * k + c] = sc * v;
        }
    }
    b
}

/// Gram matrix `BᵀB` of the non-pivot columns and `Bᵀb_p`.
fn normal_equations(x: &CovariateMatrix, phi: f64, p: usize, others: &[usize]) -> (SymmetricMatrix, Vec<f64>) {
    let k = others.len();
    let rows = x.n() + x.d();
    let b = augmented(x, phi, others);
    let bp = augmented(x, phi, &[p]);
    let gram = SymmetricMatrix::from_fn(k, |a, c| (0..rows).map(|r| b[r * k + a] * b[r * k + c]).sum());
    let rhs = (0..k).map(|a| (0..rows).map(|r| b[r * k + a] * bp[r]).sum()).collect();
    (gram, rhs)
}

/// Reference direction from the explicit augmented matrix and its normal
/// equations. Cubic in the number of alive units; for tests only.
pub fn step_direction_naive(state: &WalkState, x: &CovariateMatrix, phi: f64) -> Result<Vec<f64>> {
    let (p, mut u) = pivot_and_unit(state)?;
    let others: Vec<usize> = state.others().collect();
    if others.is_empty() {
        return Ok(u);
    }
    let (gram, rhs) = normal_equations(x, phi, p, &others);
    let factor = cholesky_factor(&gram).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } => Error::SingularSystem,
        other => other.into(),
    })?;
    let sol = chol_solve(&factor, &rhs)?;
    for (&i, v) in others.iter().zip(sol) {
        u[i] = -v;
    }
    Ok(u)
}

/// Reference for the balanced direction: the dense Lagrangian system
/// `[[2BᵀB, 𝟏], [𝟏ᵀ, 0]] [u; ν] = [−2Bᵀb_p; −1]` solved by LU.
pub fn step_direction_balanced_kkt(state: &WalkState, x: &CovariateMatrix, phi: f64) -> Result<Vec<f64>> {
    let (p, mut u) = pivot_and_unit(state)?;
    let others: Vec<usize> = state.others().collect();
    let k = others.len();
    if k == 0 {
        return Ok(u);
    }
    let (gram, rhs) = normal_equations(x, phi, p, &others);
    let m = k + 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for r in 0..k {
        for c in 0..k {
            a[r * m + c] = 2.0 * gram.get(r, c);
        }
        a[r * m + k] = 1.0;
        a[k * m + r] = 1.0;
        b[r] = -2.0 * rhs[r];
    }
    b[k] = -1.0;
    let sol = lu_solve(&a, &b).map_err(|_| Error::SingularSystem)?;
    for (&i, v) in others.iter().zip(sol) {
        u[i] = v;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn state_for(x: &CovariateMatrix, phi: f64, alive: Vec<usize>, pivot: usize) -> WalkState {
        let mut z = vec![1.0; x.n()];
        for &i in &alive {
            z[i] = 0.0;
        }
        WalkState::from_parts(x, phi, z, alive, Some(pivot)).unwrap()
    }

    fn random_x(n: usize, d: usize, seed: u64) -> CovariateMatrix {
        let mut rng = stream(seed, 0);
        CovariateMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn regularizer_values() {
        assert_eq!(regularizer(0.5, 1.0), 1.0);
        assert_eq!(regularizer(0.5, 2.0), 4.0);
        assert!((regularizer(0.9, 1.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_identical_units() {
        let x = CovariateMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let s = state_for(&x, 0.5, vec![0, 1], 0);
        let fast = step_direction_fast(&s, &x, 0.5).unwrap();
        assert!((fast[0] - 1.0).abs() < 1e-15 && (fast[1] + 0.5).abs() < 1e-12);
        let naive = step_direction_naive(&s, &x, 0.5).unwrap();
        assert!(max_diff(&fast, &naive) < 1e-12);
    }

    #[test]
    fn phi_one_gives_unit_vector() {
        let x = random_x(5, 2, 1);
        let s = state_for(&x, 1.0, vec![0, 2, 3], 2);
        let e = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(step_direction_fast(&s, &x, 1.0).unwrap(), e);
        assert_eq!(step_direction_naive(&s, &x, 1.0).unwrap(), e);
        let b = step_direction_balanced(&s, &x, 1.0).unwrap();
        assert_eq!(b, vec![-0.5, 0.0, 1.0, -0.5, 0.0]);
    }

    #[test]
    fn lone_pivot_gives_unit_vector() {
        let x = random_x(4, 2, 2);
        let s = state_for(&x, 0.4, vec![1], 1);
        let e = vec![0.0, 1.0, 0.0, 0.0];
        assert_eq!(step_direction_naive(&s, &x, 0.4).unwrap(), e);
        assert_eq!(step_direction_fast(&s, &x, 0.4).unwrap(), e);
        assert_eq!(step_direction_balanced(&s, &x, 0.4).unwrap(), e);
        assert_eq!(step_direction_balanced_kkt(&s, &x, 0.4).unwrap(), e);
    }

    #[test]
    fn missing_pivot() {
        let x = random_x(3, 1, 3);
        let mut s = state_for(&x, 0.5, vec![0, 1, 2], 0);
        s.pivot = None;
        assert_eq!(step_direction_fast(&s, &x, 0.5), Err(Error::NoPivot));
        assert_eq!(step_direction_naive(&s, &x, 0.5), Err(Error::NoPivot));
        assert_eq!(step_direction_balanced(&s, &x, 0.5), Err(Error::NoPivot));
    }

    #[test]
    fn fast_matches_naive_random() {
        let x = random_x(12, 4, 4);
        let s = state_for(&x, 0.3, (0..12).collect(), 5);
        let fast = step_direction_fast(&s, &x, 0.3).unwrap();
        let naive = step_direction_naive(&s, &x, 0.3).unwrap();
        assert!(max_diff(&fast, &naive) <= 1e-8);
    }

    #[test]
    fn balanced_matches_kkt_random() {
        let x = random_x(10, 3, 5);
        let s = state_for(&x, 0.5, vec![0, 1, 3, 4, 6, 7, 9], 4);
        let fast = step_direction_balanced(&s, &x, 0.5).unwrap();
        let kkt = step_direction_balanced_kkt(&s, &x, 0.5).unwrap();
        assert!(max_diff(&fast, &kkt) <= 1e-8);
        assert!(fast.iter().sum::<f64>().abs() <= 1e-10);
        assert_eq!(fast[4], 1.0);
        assert_eq!(fast[2], 0.0);
    }

    proptest! {
        #[test]
        fn prop_directions_agree(
            n in 2usize..20,
            d in 1usize..6,
            phi in 0.05f64..0.99,
            seed in any::<u64>(),
        ) {
            let x = random_x(n, d, seed);
            let mut rng = stream(seed, 1);
            let mut alive: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            if alive.is_empty() {
                alive.push(0);
            }
            let pivot = alive[rng.gen_range(0..alive.len())];
            let s = state_for(&x, phi, alive, pivot);
            let fast = step_direction_fast(&s, &x, phi).unwrap();
            let naive = step_direction_naive(&s, &x, phi).unwrap();
            prop_assert!(max_diff(&fast, &naive) <= 1e-8);
            let bal = step_direction_balanced(&s, &x, phi).unwrap();
            let kkt = step_direction_balanced_kkt(&s, &x, phi).unwrap();
            prop_assert!(max_diff(&bal, &kkt) <= 1e-8);
            if s.alive.len() >= 2 {
                prop_assert!(bal.iter().sum::<f64>().abs() <= 1e-10);
            }
        }
    }
}
