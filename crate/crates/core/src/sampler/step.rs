use crate::error::{Error, Result};

/// Coordinates this close to ±1 after an update are frozen at ±1.
pub const SNAP_TOL: f64 = 1e-7;

/// Largest step lengths keeping `z ± t·u` inside the cube, with the
/// coordinate that reaches the boundary first in each direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub plus: f64,
    pub minus: f64,
    pub plus_hit: usize,
    pub minus_hit: usize,
}

impl StepSizes {
    /// Probability of taking the positive step, which keeps `E[Δz] = 0`.
    pub fn plus_probability(&self) -> f64 {
        self.minus / (self.plus + self.minus)
    }
}

pub fn step_sizes(z: &[f64], u: &[f64]) -> Result<StepSizes> {
    if z.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: u.len(),
        });
    }
    let mut out = StepSizes {
        plus: f64::INFINITY,
        minus: f64::INFINITY,
        plus_hit: usize::MAX,
        minus_hit: usize::MAX,
    };
    for (i, (&zi, &ui)) in z.iter().zip(u).enumerate() {
        if ui == 0.0 {
            continue;
        }
        let (tp, tm) = if ui > 0.0 {
            ((1.0 - zi) / ui, (1.0 + zi) / ui)
        } else {
            ((-1.0 - zi) / ui, (zi - 1.0) / ui)
        };
        if tp < out.plus {
            out.plus = tp;
            out.plus_hit = i;
        }
        if tm < out.minus {
            out.minus = tm;
            out.minus_hit = i;
        }
    }
    if out.plus_hit == usize::MAX {
        return Err(Error::ZeroDirection);
    }
    Ok(out)
}

/// Moves `z` by `delta·u` over the alive set, lands `hit` exactly on the
/// boundary, snaps near-boundary coordinates and drops them from `alive`.
/// Returns the newly frozen units in ascending order.
pub(crate) fn apply_step(z: &mut [f64], alive: &mut Vec<usize>, u: &[f64], delta: f64, hit: usize) -> Vec<usize> {
    for &i in alive.iter() {
        let ui = u[i];
        if ui != 0.0 {
            z[i] += delta * ui;
        }
    }
    z[hit] = (delta * u[hit]).signum();
    let mut frozen = Vec::new();
    alive.retain(|&i| {
        if z[i].abs() >= 1.0 - SNAP_TOL {
            z[i] = z[i].signum();
            frozen.push(i);
            false
        } else {
            true
        }
    });
    frozen
}

#[cfg(test)]
mod tests {
    use super::*;

    // Scans t over a fine grid for the last point that stays in the cube.
    fn brute_force(z: &[f64], u: &[f64], sign: f64) -> f64 {
        let inside = |t: f64| z.iter().zip(u).all(|(a, b)| (a + sign * t * b).abs() <= 1.0 + 1e-12);
        let (mut lo, mut hi) = (0.0, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn center_of_cube() {
        let s = step_sizes(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!((s.plus, s.minus), (1.0, 1.0));
        assert_eq!(s.plus_probability(), 0.5);
    }

    #[test]
    fn examples_match_line_search() {
        let cases: [(&[f64], &[f64], f64, f64); 2] = [
            (&[0.5, 0.0], &[1.0, -0.5], 0.5, 1.5),
            (&[0.0, 0.9], &[1.0, 1.0], 0.1, 1.0),
        ];
        for (z, u, p, m) in cases {
            let s = step_sizes(z, u).unwrap();
            assert!((s.plus - p).abs() < 1e-12 && (s.minus - m).abs() < 1e-12);
            assert!((brute_force(z, u, 1.0) - p).abs() < 1e-9);
            assert!((brute_force(z, u, -1.0) - m).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_direction_is_an_error() {
        assert_eq!(step_sizes(&[0.0, 0.1], &[0.0, 0.0]), Err(Error::ZeroDirection));
    }

    #[test]
    fn apply_lands_on_boundary_and_freezes() {
        let mut z = vec![0.5, 0.0, 1.0];
        let mut alive = vec![0, 1];
        let u = [1.0, -0.5, 0.0];
        let s = step_sizes(&z, &u).unwrap();
        let frozen = apply_step(&mut z, &mut alive, &u, s.plus, s.plus_hit);
        assert_eq!(frozen, vec![0]);
        assert_eq!(alive, vec![1]);
        assert_eq!(z, vec![1.0, -0.25, 1.0]);

        let mut z = vec![0.5, 0.0];
        let mut alive = vec![0, 1];
        let frozen = apply_step(&mut z, &mut alive, &u[..2], -s.minus, s.minus_hit);
        assert_eq!(frozen, vec![0]);
        assert_eq!(z[0], -1.0);
        assert!((z[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn snapping_catches_near_ties() {
        let mut z = vec![0.0, 0.5 - 5e-8];
        let mut alive = vec![0, 1];
        let u = [1.0, 0.5];
        let s = step_sizes(&z, &u).unwrap();
        let frozen = apply_step(&mut z, &mut alive, &u, s.plus, s.plus_hit);
        assert_eq!(frozen, vec![0, 1]);
        assert!(alive.is_empty());
        assert_eq!(z, vec![1.0, 1.0]);
    }
}
