//! Exact propagation of sampled realizations and ensemble averaging.
//!
//! Each realization costs one Hermitian eigendecomposition of the full
//! `2 env_dim` Hamiltonian. The initial product state is rotated into the
//! eigenbasis once, all time points are then a single complex matrix
//! product (`eigenvectors * phase matrix`), and the reduced qubit state at
//! each time is read off by tracing out the environment of the pure state
//! column by column.
//!
//! Ensemble means and standard errors are accumulated in realization
//! order after a parallel map, so results are bitwise independent of the
//! number of worker threads. Mixed initial qubit states are handled by
//! evolving both eigenstates of the initial density matrix through the
//! same draws (one eigendecomposition, two cheap propagations) and
//! combining them convexly per realization.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::ensembles::{DrawStreams, EnvironmentDraw, SeedPolicy};
use crate::linalg::{hermitian_eigendecompose, ComplexMatrix, HermitianEigen};
use crate::model::{build_hamiltonian, InitialState, ModelParams};
use crate::{Error, Result};

/// How many complete realizations (draw + eigendecomposition) may be
/// discarded per realization index before giving up.
const MAX_REALIZATION_ATTEMPTS: usize = 8;

/// Strictly ascending, non-negative time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("time grid has no points"));
        }
        if !points[0].is_finite() || points[0] < 0.0 {
            return Err(Error::OutOfRange {
                name: "points[0]",
                value: points[0],
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if points.windows(2).any(|w| !w[1].is_finite() || w[1] <= w[0]) {
            return Err(Error::GridMismatch(
                "time points must be finite and strictly ascending".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `n_points` evenly spaced times from 0 to `t_max` inclusive.
    pub fn uniform(t_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::OutOfRange {
                name: "n_points",
                value: n_points as f64,
                min: 2.0,
                max: f64::INFINITY,
            });
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::OutOfRange {
                name: "t_max",
                value: t_max,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
            });
        }
        let step = t_max / (n_points - 1) as f64;
        Self::new((0..n_points).map(|k| k as f64 * step).collect())
    }

    /// The default observation window: 512 points over four Heisenberg
    /// times of the environment.
    pub fn default_grid() -> Self {
        Self::uniform(8.0 * PI, 512).expect("static grid parameters are valid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ensemble-averaged reduced qubit states on a time grid.
///
/// `mean_rho[k]` is the average 2x2 density matrix at `grid.points()[k]`
/// (trace 1 within 1e-10, eigenvalues above -1e-9). `stderr_rho[k]`
/// stores the standard error of the mean separately for real and
/// imaginary parts of each entry: `stderr_rho[k][(i, j)].re` is the
/// standard error of `Re mean_rho[k][(i, j)]`, and likewise for `im`.
/// With a single realization the standard errors are zero.
#[derive(Debug, Clone)]
pub struct AveragedSeries {
    pub grid: TimeGrid,
    pub mean_rho: Vec<ComplexMatrix>,
    pub stderr_rho: Vec<ComplexMatrix>,
    pub n_run: usize,
}

/// Compact per-time reduced state, row-major `[rho11, rho12, rho21, rho22]`.
type Compact = [Complex64; 4];

fn evolve_with_eigen(
    eig: &HermitianEigen,
    env_state: &Array1<Complex64>,
    qubit: &Array1<Complex64>,
    grid: &TimeGrid,
) -> Vec<Compact> {
    let n = env_state.len();
    let dim = 2 * n;
    let mut psi0 = Array1::<Complex64>::zeros(dim);
    for q in 0..2 {
        for i in 0..n {
            psi0[q * n + i] = qubit[q] * env_state[i];
        }
    }

    // Amplitudes in the eigenbasis, then one phase per (level, time).
    let adjoint = eig.vectors.t().mapv(|z| z.conj());
    let phi = adjoint.dot(&psi0);
    let times = grid.points();
    let mut phases = Array2::<Complex64>::zeros((dim, times.len()));
    for j in 0..dim {
        let lambda = eig.values[j];
        let amp = phi[j];
        for (k, &t) in times.iter().enumerate() {
            phases[(j, k)] = Complex64::cis(-lambda * t) * amp;
        }
    }
    // Columns of psi_t are the full states at each time.
    let psi_t = eig.vectors.dot(&phases);

    (0..times.len())
        .map(|k| {
            let col = psi_t.column(k);
            let mut r11 = Complex64::ZERO;
            let mut r12 = Complex64::ZERO;
            let mut r22 = Complex64::ZERO;
            for i in 0..n {
                let up = col[i];
                let down = col[n + i];
                r11 += up * up.conj();
                r12 += up * down.conj();
                r22 += down * down.conj();
            }
            [r11, r12, r12.conj(), r22]
        })
        .collect()
}

/// Decomposition of an initial qubit state into pure components sharing
/// the same environment draws.
fn pure_components(init: &InitialState) -> Result<Vec<(f64, Array1<Complex64>)>> {
    // Revalidate; the struct fields are public.
    let init = InitialState::new(init.bloch)?;
    if init.is_pure() {
        return Ok(vec![(1.0, init.pure_state_vector()?)]);
    }
    let r = init.bloch_norm();
    let direction = if r < 1e-14 {
        [0.0, 0.0, 1.0]
    } else {
        [init.bloch[0] / r, init.bloch[1] / r, init.bloch[2] / r]
    };
    let plus = InitialState::new(direction)?;
    let minus = InitialState::new([-direction[0], -direction[1], -direction[2]])?;
    Ok(vec![
        (0.5 * (1.0 + r), plus.pure_state_vector()?),
        (0.5 * (1.0 - r), minus.pure_state_vector()?),
    ])
}

fn compact_to_matrix(c: &Compact) -> ComplexMatrix {
    ndarray::array![[c[0], c[1]], [c[2], c[3]]]
}

/// Reduced qubit states of a single realization at every grid time.
///
/// The initial qubit state must be pure; ensemble averaging handles mixed
/// initial states by convex combination, not this function.
pub fn evolve_realization(
    params: &ModelParams,
    draw: &EnvironmentDraw,
    init: &InitialState,
    grid: &TimeGrid,
) -> Result<Vec<ComplexMatrix>> {
    params.validate()?;
    draw.validate()?;
    if !init.is_pure() {
        return Err(Error::NonPureInitial(init.bloch_norm()));
    }
    let qubit = init.pure_state_vector()?;
    let h = build_hamiltonian(params, draw)?;
    let eig = hermitian_eigendecompose(&h)?;
    Ok(evolve_with_eigen(&eig, &draw.env_state, &qubit, grid)
        .iter()
        .map(compact_to_matrix)
        .collect())
}

/// One realization of the ensemble: sample, diagonalize, evolve every
/// pure component, combine. Failed draws or eigendecompositions are
/// logged and retried on the same streams.
fn run_one_realization(
    params: &ModelParams,
    components: &[(f64, Array1<Complex64>)],
    grid: &TimeGrid,
    seed: &SeedPolicy,
) -> Result<Vec<Compact>> {
    let mut streams = DrawStreams::new(seed);
    let mut last_err: Option<Error> = None;
    for attempt in 0..MAX_REALIZATION_ATTEMPTS {
        let draw = EnvironmentDraw::sample_from(params.env_dim, params.spectrum_kind, &mut streams)?;
        let h = build_hamiltonian(params, &draw)?;
        match hermitian_eigendecompose(&h) {
            Ok(eig) => {
                let mut combined = vec![[Complex64::ZERO; 4]; grid.len()];
                for (weight, qubit) in components {
                    let w = Complex64::new(*weight, 0.0);
                    let series = evolve_with_eigen(&eig, &draw.env_state, qubit, grid);
                    for (acc, rho) in combined.iter_mut().zip(&series) {
                        for e in 0..4 {
                            acc[e] += w * rho[e];
                        }
                    }
                }
                return Ok(combined);
            }
            Err(e @ Error::ConvergenceFailure(_)) => {
                log::warn!(
                    "discarding realization {} (attempt {attempt}): {e}",
                    seed.realization_index
                );
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::ConvergenceFailure(format!(
            "no valid realization in {MAX_REALIZATION_ATTEMPTS} attempts"
        ))
    }))
}

/// Ensemble-averaged reduced dynamics over `n_run` realizations.
///
/// Realization `k` is seeded purely by `(master_seed, k)` and the
/// averages are reduced in index order, so the output is bitwise
/// reproducible for any thread count.
pub fn run_ensemble(
    params: &ModelParams,
    init: &InitialState,
    grid: &TimeGrid,
    n_run: usize,
    master_seed: u64,
) -> Result<AveragedSeries> {
    params.validate()?;
    if n_run == 0 {
        return Err(Error::EmptyInput("n_run must be at least 1"));
    }
    let components = pure_components(init)?;

    let realizations: Vec<Vec<Compact>> = (0..n_run)
        .into_par_iter()
        .map(|k| run_one_realization(params, &components, grid, &SeedPolicy::new(master_seed, k as u64)))
        .collect::<Result<_>>()?;

    let nt = grid.len();
    let inv_n = 1.0 / n_run as f64;
    let mut mean = vec![[Complex64::ZERO; 4]; nt];
    for series in &realizations {
        for (acc, rho) in mean.iter_mut().zip(series) {
            for e in 0..4 {
                acc[e] += rho[e];
            }
        }
    }
    for rho in &mut mean {
        for entry in rho.iter_mut() {
            *entry *= inv_n;
        }
    }

    let mut stderr = vec![[Complex64::ZERO; 4]; nt];
    if n_run > 1 {
        let mut sumsq = vec![[Complex64::ZERO; 4]; nt];
        for series in &realizations {
            for ((acc, rho), m) in sumsq.iter_mut().zip(series).zip(&mean) {
                for e in 0..4 {
                    let d = rho[e] - m[e];
                    acc[e] += Complex64::new(d.re * d.re, d.im * d.im);
                }
            }
        }
        let scale = 1.0 / (n_run as f64 * (n_run - 1) as f64);
        for (se, sq) in stderr.iter_mut().zip(&sumsq) {
            for e in 0..4 {
                se[e] = Complex64::new((sq[e].re * scale).sqrt(), (sq[e].im * scale).sqrt());
            }
        }
    }

    let series = AveragedSeries {
        grid: grid.clone(),
        mean_rho: mean.iter().map(compact_to_matrix).collect(),
        stderr_rho: stderr.iter().map(compact_to_matrix).collect(),
        n_run,
    };
    validate_averaged_states(&series)?;
    Ok(series)
}

/// The averaged states must still be states: unit trace to 1e-10 and no
/// eigenvalue below -1e-9.
fn validate_averaged_states(series: &AveragedSeries) -> Result<()> {
    for (k, rho) in series.mean_rho.iter().enumerate() {
        let trace = rho[(0, 0)].re + rho[(1, 1)].re;
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotAState(format!(
                "averaged state at grid point {k} has trace {trace}"
            )));
        }
        let mean = 0.5 * trace;
        let half_gap = 0.5 * (rho[(0, 0)].re - rho[(1, 1)].re);
        let split = (half_gap.powi(2) + rho[(0, 1)].norm_sqr()).sqrt();
        if mean - split < -1e-9 {
            return Err(Error::NotAState(format!(
                "averaged state at grid point {k} has eigenvalue {}",
                mean - split
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::SpectrumKind;
    use crate::model::{Axis, CouplingAxis};
    use approx::assert_abs_diff_eq;

    fn params(mu: f64, axis: CouplingAxis) -> ModelParams {
        ModelParams {
            delta: 1.0,
            mu,
            env_dim: 32,
            coupling_axis: axis,
            spectrum_kind: SpectrumKind::GueUnfolded,
        }
    }

    fn short_grid() -> TimeGrid {
        TimeGrid::uniform(6.0, 13).unwrap()
    }

    #[test]
    fn grid_construction_and_validation() {
        let g = TimeGrid::uniform(8.0 * PI, 512).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[511], 8.0 * PI);
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![-0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());
    }

    #[test]
    fn decoupled_qubit_precesses_freely() {
        // At mu = 0 the qubit stays pure and rho21 = e^{i delta t} / 2
        // for an x+ start; the environment cannot touch it.
        let p = params(0.0, CouplingAxis::X);
        let draw = EnvironmentDraw::sample(32, SpectrumKind::GueUnfolded, &SeedPolicy::new(1, 0))
            .unwrap();
        let grid = short_grid();
        let states =
            evolve_realization(&p, &draw, &InitialState::pauli_plus(Axis::X), &grid).unwrap();
        for (k, &t) in grid.points().iter().enumerate() {
            let expect = Complex64::cis(p.delta * t) * 0.5;
            assert!((states[k][(1, 0)] - expect).norm() < 1e-12, "t = {t}");
            assert_abs_diff_eq!(states[k][(0, 0)].re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(states[k][(1, 1)].re, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn z_coupled_z_state_is_frozen() {
        // With coupling along z and the qubit starting in |0>, the qubit
        // factor commutes with everything that acts on it.
        let p = params(0.3, CouplingAxis::Z);
        let draw = EnvironmentDraw::sample(32, SpectrumKind::GueUnfolded, &SeedPolicy::new(2, 0))
            .unwrap();
        let states =
            evolve_realization(&p, &draw, &InitialState::pauli_plus(Axis::Z), &short_grid())
                .unwrap();
        for rho in &states {
            assert_abs_diff_eq!(rho[(0, 0)].re, 1.0, epsilon = 1e-12);
            assert!(rho[(1, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn reduced_states_have_unit_trace() {
        let p = params(0.2, CouplingAxis::X);
        let draw = EnvironmentDraw::sample(32, SpectrumKind::GueUnfolded, &SeedPolicy::new(3, 1))
            .unwrap();
        let states =
            evolve_realization(&p, &draw, &InitialState::pauli_plus(Axis::Y), &short_grid())
                .unwrap();
        for rho in &states {
            let tr = rho[(0, 0)].re + rho[(1, 1)].re;
            assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-12);
            assert!(rho[(0, 0)].im.abs() < 1e-14 && rho[(1, 1)].im.abs() < 1e-14);
            // Purity of a reduced pure-state marginal is at most 1.
            let purity = rho[(0, 0)].norm_sqr()
                + rho[(1, 1)].norm_sqr()
                + 2.0 * rho[(1, 0)].norm_sqr();
            assert!(purity <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn mixed_initial_state_is_rejected_per_realization() {
        let p = params(0.1, CouplingAxis::X);
        let draw = EnvironmentDraw::sample(32, SpectrumKind::GueUnfolded, &SeedPolicy::new(4, 0))
            .unwrap();
        let init = InitialState::new([0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            evolve_realization(&p, &draw, &init, &short_grid()),
            Err(Error::NonPureInitial(_))
        ));
    }

    #[test]
    fn ensemble_mean_is_reproducible_across_thread_counts() {
        let p = params(0.1, CouplingAxis::X);
        let grid = short_grid();
        let init = InitialState::pauli_plus(Axis::X);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ensemble(&p, &init, &grid, 6, 77).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.n_run, 6);
        for k in 0..grid.len() {
            assert_eq!(a.mean_rho[k], b.mean_rho[k]);
            assert_eq!(a.stderr_rho[k], b.stderr_rho[k]);
        }
    }

    #[test]
    fn mixed_ensemble_is_convex_combination_of_pure_runs() {
        let p = params(0.15, CouplingAxis::X);
        let grid = short_grid();
        let mixed = InitialState::new([0.0, 0.0, 0.5]).unwrap();
        let up = InitialState::pauli_plus(Axis::Z);
        let down = InitialState::new([0.0, 0.0, -1.0]).unwrap();
        let m = run_ensemble(&p, &mixed, &grid, 4, 19).unwrap();
        let u = run_ensemble(&p, &up, &grid, 4, 19).unwrap();
        let d = run_ensemble(&p, &down, &grid, 4, 19).unwrap();
        for k in 0..grid.len() {
            for i in 0..2 {
                for j in 0..2 {
                    let expect = 0.75 * u.mean_rho[k][(i, j)] + 0.25 * d.mean_rho[k][(i, j)];
                    assert!((m.mean_rho[k][(i, j)] - expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn averaging_can_only_lose_purity() {
        // Jensen: purity of the mean state never exceeds the mean purity
        // of the realizations.
        let p = params(0.25, CouplingAxis::X);
        let grid = short_grid();
        let init = InitialState::pauli_plus(Axis::X);
        let n_run = 8;
        let series = run_ensemble(&p, &init, &grid, n_run, 5).unwrap();
        let mut mean_purity = vec![0.0; grid.len()];
        for k in 0..n_run {
            let draw = EnvironmentDraw::sample(
                p.env_dim,
                p.spectrum_kind,
                &SeedPolicy::new(5, k as u64),
            )
            .unwrap();
            let states = evolve_realization(&p, &draw, &init, &grid).unwrap();
            for (acc, rho) in mean_purity.iter_mut().zip(&states) {
                *acc += (rho[(0, 0)].norm_sqr()
                    + rho[(1, 1)].norm_sqr()
                    + 2.0 * rho[(1, 0)].norm_sqr())
                    / n_run as f64;
            }
        }
        for (k, rho) in series.mean_rho.iter().enumerate() {
            let p_mean = rho[(0, 0)].norm_sqr()
                + rho[(1, 1)].norm_sqr()
                + 2.0 * rho[(1, 0)].norm_sqr();
            assert!(p_mean <= mean_purity[k] + 1e-12);
        }
    }

    #[test]
    fn single_run_has_zero_stderr() {
        let p = params(0.1, CouplingAxis::X);
        let series = run_ensemble(
            &p,
            &InitialState::pauli_plus(Axis::X),
            &short_grid(),
            1,
            23,
        )
        .unwrap();
        for se in &series.stderr_rho {
            assert_eq!(se[(0, 0)], Complex64::ZERO);
            assert_eq!(se[(1, 0)], Complex64::ZERO);
        }
    }

    #[test]
    fn zero_runs_is_an_error() {
        let p = params(0.1, CouplingAxis::X);
        assert!(matches!(
            run_ensemble(&p, &InitialState::pauli_plus(Axis::X), &short_grid(), 0, 1),
            Err(Error::EmptyInput(_))
        ));
    }
}
