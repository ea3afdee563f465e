//! Scalar and vector observables derived from averaged qubit states.

use num_complex::Complex64;

use crate::linalg::{hermiticity_deviation, max_abs, trace_norm_2x2, ComplexMatrix, HERMITICITY_TOL};
use crate::propagation::{AveragedSeries, TimeGrid};
use crate::{Error, Result};

/// Fraction of the grid used for equilibrium estimates unless a caller
/// chooses otherwise.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;

/// Bloch vector `(2 Re rho21, 2 Im rho21, rho11 - rho22)` of a 2x2 state.
pub fn bloch(rho: &ComplexMatrix) -> [f64; 3] {
    [
        2.0 * rho[(1, 0)].re,
        2.0 * rho[(1, 0)].im,
        rho[(0, 0)].re - rho[(1, 1)].re,
    ]
}

/// Bloch vectors of an averaged series on its grid.
#[derive(Debug, Clone)]
pub struct BlochTrajectory {
    pub grid: TimeGrid,
    pub vectors: Vec<[f64; 3]>,
}

impl BlochTrajectory {
    pub fn from_series(series: &AveragedSeries) -> Self {
        Self {
            grid: series.grid.clone(),
            vectors: series.mean_rho.iter().map(bloch).collect(),
        }
    }
}

/// Component-wise standard errors of the Bloch vector. Each realization
/// contributes a unit-trace state, so `z = 2 rho11 - 1` and the z error
/// follows from the rho11 scatter alone.
pub fn bloch_stderr(series: &AveragedSeries) -> Vec<[f64; 3]> {
    series
        .stderr_rho
        .iter()
        .map(|se| {
            [
                2.0 * se[(1, 0)].re,
                2.0 * se[(1, 0)].im,
                2.0 * se[(0, 0)].re,
            ]
        })
        .collect()
}

fn ensure_state(rho: &ComplexMatrix) -> Result<()> {
    if rho.dim() != (2, 2) {
        return Err(Error::DimensionMismatch(format!(
            "qubit observables need 2x2 states, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let dev = hermiticity_deviation(rho);
    let tol = HERMITICITY_TOL * max_abs(rho).max(1.0);
    if dev > tol {
        return Err(Error::NotAState(format!(
            "not Hermitian: deviation {dev:.3e} above {tol:.3e}"
        )));
    }
    let trace = rho[(0, 0)].re + rho[(1, 1)].re;
    if (trace - 1.0).abs() > 1e-9 {
        return Err(Error::NotAState(format!("trace {trace} is not 1")));
    }
    let mean = 0.5 * trace;
    let half_gap = 0.5 * (rho[(0, 0)].re - rho[(1, 1)].re);
    let split = (half_gap.powi(2) + rho[(0, 1)].norm_sqr()).sqrt();
    if mean - split < -1e-9 {
        return Err(Error::NotAState(format!(
            "negative eigenvalue {}",
            mean - split
        )));
    }
    Ok(())
}

/// Purity `tr(rho^2)` of a qubit density matrix.
pub fn purity(rho: &ComplexMatrix) -> Result<f64> {
    ensure_state(rho)?;
    Ok(rho.iter().map(Complex64::norm_sqr).sum())
}

/// Purity `r^2 + (1 - r)^2` of a diagonal qubit state with upper
/// population `r`.
pub fn purity_diag(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) || !r.is_finite() {
        return Err(Error::OutOfRange {
            name: "population",
            value: r,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(r * r + (1.0 - r) * (1.0 - r))
}

/// Purity of the averaged state at every grid time, with the standard
/// error propagated linearly from the Bloch component errors:
/// `P = (1 + |r|^2) / 2`, so `dP = r . dr`.
pub fn purity_series(series: &AveragedSeries) -> Vec<(f64, f64)> {
    let errors = bloch_stderr(series);
    series
        .mean_rho
        .iter()
        .zip(&errors)
        .map(|(rho, se)| {
            let r = bloch(rho);
            let p = 0.5 * (1.0 + r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
            let var = (r[0] * se[0]).powi(2) + (r[1] * se[1]).powi(2) + (r[2] * se[2]).powi(2);
            (p, var.sqrt())
        })
        .collect()
}

/// Trace distance `|rho - sigma|_1 / 2` between two qubit states.
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    ensure_state(rho)?;
    ensure_state(sigma)?;
    Ok(0.5 * trace_norm_2x2(&(rho - sigma))?)
}

/// Largest pointwise trace distance between two series on the same grid.
pub fn max_trace_distance(a: &AveragedSeries, b: &AveragedSeries) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "series have {} and {} points (or different times)",
            a.grid.len(),
            b.grid.len()
        )));
    }
    let mut worst = 0.0f64;
    for (rho, sigma) in a.mean_rho.iter().zip(&b.mean_rho) {
        worst = worst.max(trace_distance(rho, sigma)?);
    }
    Ok(worst)
}

/// Late-time equilibrium of a series: mean Bloch vector over the trailing
/// `tail_fraction` of the grid, with a scalar standard error from the
/// scatter of the tail samples.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumEstimate {
    pub bloch: [f64; 3],
    /// `sqrt(sum_c stderr_c^2)` over the three components.
    pub stderr: f64,
    pub n_tail: usize,
}

pub fn equilibrium_estimate(
    series: &AveragedSeries,
    tail_fraction: f64,
) -> Result<EquilibriumEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::OutOfRange {
            name: "tail_fraction",
            value: tail_fraction,
            min: f64::MIN_POSITIVE,
            max: 0.5,
        });
    }
    let n = series.grid.len();
    let n_tail = ((n as f64) * tail_fraction).floor() as usize;
    if n_tail < 2 {
        return Err(Error::GridTooShort {
            tail_fraction,
            n_points: n,
        });
    }
    let tail: Vec<[f64; 3]> = series.mean_rho[n - n_tail..].iter().map(bloch).collect();
    let mut mean = [0.0f64; 3];
    for r in &tail {
        for c in 0..3 {
            mean[c] += r[c] / n_tail as f64;
        }
    }
    let mut var = [0.0f64; 3];
    for r in &tail {
        for c in 0..3 {
            var[c] += (r[c] - mean[c]).powi(2);
        }
    }
    let scale = 1.0 / (n_tail as f64 * (n_tail - 1) as f64);
    let stderr = (var.iter().map(|v| v * scale).sum::<f64>()).sqrt();
    Ok(EquilibriumEstimate {
        bloch: mean,
        stderr,
        n_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{qubit_density, InitialState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(v: [f64; 3]) -> ComplexMatrix {
        qubit_density(&InitialState::new(v).unwrap()).unwrap()
    }

    fn series_from_states(states: Vec<ComplexMatrix>) -> AveragedSeries {
        let grid = TimeGrid::uniform(states.len() as f64 - 1.0, states.len()).unwrap();
        let zeros = vec![ComplexMatrix::zeros((2, 2)); states.len()];
        AveragedSeries {
            grid,
            mean_rho: states,
            stderr_rho: zeros,
            n_run: 1,
        }
    }

    #[test]
    fn bloch_roundtrip() {
        let v = [0.3, -0.4, 0.5];
        let r = bloch(&state(v));
        for c in 0..3 {
            assert_abs_diff_eq!(r[c], v[c], epsilon = 1e-14);
        }
    }

    #[test]
    fn purity_of_named_states() {
        assert_abs_diff_eq!(purity(&state([1.0, 0.0, 0.0])).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(purity(&state([0.0, 0.0, 0.0])).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn purity_rejects_non_states() {
        let mut rho = state([0.0, 0.0, 0.0]);
        rho[(0, 0)] = Complex64::new(1.5, 0.0);
        assert!(matches!(purity(&rho), Err(Error::NotAState(_))));
        // Hermitian, unit trace, but an eigenvalue below zero.
        let mut rho = state([0.0, 0.0, 0.0]);
        rho[(0, 1)] = Complex64::new(0.9, 0.0);
        rho[(1, 0)] = Complex64::new(0.9, 0.0);
        assert!(matches!(purity(&rho), Err(Error::NotAState(_))));
    }

    #[test]
    fn purity_diag_matches_formula() {
        assert_abs_diff_eq!(purity_diag(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(purity_diag(0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(purity_diag(0.775).unwrap(), 0.775f64.powi(2) + 0.225f64.powi(2), epsilon = 1e-15);
        assert!(matches!(purity_diag(1.2), Err(Error::OutOfRange { .. })));
        assert!(matches!(purity_diag(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn trace_distance_of_orthogonal_states_is_one() {
        let up = state([0.0, 0.0, 1.0]);
        let down = state([0.0, 0.0, -1.0]);
        assert_abs_diff_eq!(trace_distance(&up, &down).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&up, &up).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn max_trace_distance_picks_the_worst_point() {
        let a = series_from_states(vec![state([0.0, 0.0, 1.0]), state([1.0, 0.0, 0.0])]);
        let b = series_from_states(vec![state([0.0, 0.0, 1.0]), state([0.0, 1.0, 0.0])]);
        // Distances are 0 and sqrt(2)/2.
        let d = max_trace_distance(&a, &b).unwrap();
        assert_abs_diff_eq!(d, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn max_trace_distance_needs_matching_grids() {
        let a = series_from_states(vec![state([0.0, 0.0, 1.0]), state([1.0, 0.0, 0.0])]);
        let b = series_from_states(vec![
            state([0.0, 0.0, 1.0]),
            state([1.0, 0.0, 0.0]),
            state([1.0, 0.0, 0.0]),
        ]);
        assert!(matches!(
            max_trace_distance(&a, &b),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn equilibrium_of_constant_tail() {
        let states: Vec<ComplexMatrix> = (0..16)
            .map(|k| {
                if k < 8 {
                    state([0.9, 0.0, 0.0])
                } else {
                    state([0.3, 0.0, 0.1])
                }
            })
            .collect();
        let est = equilibrium_estimate(&series_from_states(states), 0.25).unwrap();
        assert_eq!(est.n_tail, 4);
        assert_abs_diff_eq!(est.bloch[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(est.bloch[2], 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(est.stderr, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn equilibrium_estimate_validates_inputs() {
        let s = series_from_states(vec![state([0.0, 0.0, 0.0]); 4]);
        assert!(matches!(
            equilibrium_estimate(&s, 0.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            equilibrium_estimate(&s, 0.6),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            equilibrium_estimate(&s, 0.25),
            Err(Error::GridTooShort { .. })
        ));
    }

    proptest! {
        // P = (1 + |r|^2) / 2 across the whole ball.
        #[test]
        fn purity_matches_bloch_norm(
            r in 0.0f64..1.0,
            costh in -1.0f64..1.0,
            phi in 0.0f64..(2.0 * std::f64::consts::PI),
        ) {
            let sinth = (1.0 - costh * costh).sqrt();
            let v = [r * sinth * phi.cos(), r * sinth * phi.sin(), r * costh];
            let p = purity(&state(v)).unwrap();
            prop_assert!((p - 0.5 * (1.0 + r * r)).abs() < 1e-12);
        }

        // Trace distance is half the Euclidean Bloch distance.
        #[test]
        fn trace_distance_is_half_bloch_distance(
            ax in -0.5f64..0.5, ay in -0.5f64..0.5, az in -0.5f64..0.5,
            bx in -0.5f64..0.5, by in -0.5f64..0.5, bz in -0.5f64..0.5,
        ) {
            let d = trace_distance(&state([ax, ay, az]), &state([bx, by, bz])).unwrap();
            let euclid = ((ax - bx).powi(2) + (ay - by).powi(2) + (az - bz).powi(2)).sqrt();
            prop_assert!((d - 0.5 * euclid).abs() < 1e-12);
        }
    }
}
