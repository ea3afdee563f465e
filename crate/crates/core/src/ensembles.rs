//! Sampling of random-matrix environments.
//!
//! One realization of the environment consists of three independent
//! pieces: a spectrum for the environment Hamiltonian, a GUE coupling
//! matrix, and a random initial environment state. Spectra come unfolded
//! to unit mean level spacing, either from an actual GUE draw (unfolded
//! through the semicircle law) or as an ordered sample of uniform points
//! with the same density but no level repulsion, which serves as the
//! uncorrelated reference ensemble.
//!
//! # Reproducibility
//!
//! Every random quantity is drawn from a ChaCha8 stream that is a pure
//! function of `(master_seed, realization_index, purpose)`, where purpose
//! separates the spectrum, coupling, and state draws. Realizations can
//! therefore be generated in any order, on any number of threads, with
//! bitwise identical results, and each standalone `sample_*` function
//! reproduces exactly the corresponding component of a composed
//! [`EnvironmentDraw`]. Draws that fail validation are discarded and
//! redrawn by continuing the same stream, so a retry is deterministic too.

use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::linalg::{hermiticity_deviation, max_abs, ComplexMatrix, HERMITICITY_TOL};
use crate::{Error, Result};

/// Which level-spacing statistics the environment spectrum follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Eigenvalues of a GUE matrix, unfolded to unit mean spacing.
    GueUnfolded,
    /// Ordered uniform points on `[0, n]`: same mean density, Poissonian
    /// spacings, no level repulsion.
    PoissonUniform,
}

/// Allowed relative deviation of the mean level spacing from 1.
pub const MEAN_SPACING_TOL: f64 = 0.05;

/// Allowed deviation of the environment state norm from 1.
pub const STATE_NORM_TOL: f64 = 1e-12;

/// How often a component may be redrawn before sampling gives up.
const MAX_SAMPLE_ATTEMPTS: usize = 16;

/// Addresses one realization's random streams.
///
/// The stream for realization `k` is a pure function of `(master_seed,
/// k)`; nothing about thread scheduling or draw order of other
/// realizations can change it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    pub master_seed: u64,
    pub realization_index: u64,
}

/// Stream purposes within one realization. The numeric values are part of
/// the reproducibility contract: changing them changes every output.
const STREAM_SPECTRUM: u64 = 0;
const STREAM_COUPLING: u64 = 1;
const STREAM_STATE: u64 = 2;
const STREAMS_PER_REALIZATION: u64 = 4;

impl SeedPolicy {
    pub fn new(master_seed: u64, realization_index: u64) -> Self {
        Self {
            master_seed,
            realization_index,
        }
    }

    fn stream_rng(&self, purpose: u64) -> ChaCha8Rng {
        let stream = self
            .realization_index
            .checked_mul(STREAMS_PER_REALIZATION)
            .and_then(|s| s.checked_add(purpose))
            .expect("realization index too large for stream addressing");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(stream);
        rng
    }
}

/// The random streams backing one realization, kept separate so the
/// spectrum, coupling, and state are independent even under retries.
pub struct DrawStreams {
    spectrum: ChaCha8Rng,
    coupling: ChaCha8Rng,
    state: ChaCha8Rng,
}

impl DrawStreams {
    pub fn new(seed: &SeedPolicy) -> Self {
        Self {
            spectrum: seed.stream_rng(STREAM_SPECTRUM),
            coupling: seed.stream_rng(STREAM_COUPLING),
            state: seed.stream_rng(STREAM_STATE),
        }
    }
}

/// One sampled environment realization.
#[derive(Debug, Clone)]
pub struct EnvironmentDraw {
    /// Unfolded spectrum, strictly ascending, mean spacing within
    /// [`MEAN_SPACING_TOL`] of 1.
    pub spectrum: Array1<f64>,
    /// GUE coupling matrix, Hermitian to [`HERMITICITY_TOL`]
    /// (off-diagonal `E|V_jl|^2 = 1`, real diagonal variance 1).
    pub coupling: ComplexMatrix,
    /// Initial environment state, unit norm to [`STATE_NORM_TOL`].
    pub env_state: Array1<Complex64>,
}

impl EnvironmentDraw {
    /// Sample a full validated realization for the given seed.
    pub fn sample(env_dim: usize, kind: SpectrumKind, seed: &SeedPolicy) -> Result<Self> {
        let mut streams = DrawStreams::new(seed);
        Self::sample_from(env_dim, kind, &mut streams)
    }

    /// Sample from already-open streams. Calling this repeatedly on the
    /// same streams yields fresh independent draws, which is how callers
    /// discard a realization (for example after an eigensolver failure)
    /// without breaking reproducibility.
    pub fn sample_from(
        env_dim: usize,
        kind: SpectrumKind,
        streams: &mut DrawStreams,
    ) -> Result<Self> {
        ensure_env_dim(env_dim)?;
        let draw = Self {
            spectrum: sample_spectrum_from(env_dim, kind, &mut streams.spectrum)?,
            coupling: draw_gue_matrix(env_dim, &mut streams.coupling),
            env_state: sample_env_state_from(env_dim, &mut streams.state)?,
        };
        draw.validate()?;
        Ok(draw)
    }

    /// Check every invariant this type promises. Sampling always returns
    /// validated draws; this exists for draws assembled by hand.
    pub fn validate(&self) -> Result<()> {
        let n = self.spectrum.len();
        if self.coupling.dim() != (n, n) || self.env_state.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "draw components disagree: spectrum {n}, coupling {:?}, state {}",
                self.coupling.dim(),
                self.env_state.len()
            )));
        }
        validate_spectrum(&self.spectrum).map_err(Error::NotAState)?;
        let tol = HERMITICITY_TOL * max_abs(&self.coupling).max(1.0);
        let dev = hermiticity_deviation(&self.coupling);
        if dev > tol {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: tol,
            });
        }
        let norm = self.env_state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::NotAState(format!(
                "environment state norm {norm} deviates from 1 beyond {STATE_NORM_TOL:.1e}"
            )));
        }
        Ok(())
    }
}

fn ensure_env_dim(env_dim: usize) -> Result<()> {
    if env_dim < 2 {
        return Err(Error::DimensionMismatch(format!(
            "environment needs at least 2 levels, got {env_dim}"
        )));
    }
    Ok(())
}

/// GUE matrix with off-diagonal entries of unit mean square modulus
/// (real and imaginary parts N(0, 1/2)) and real N(0, 1) diagonal. The
/// semicircle radius for this normalization is `2 sqrt(n)`.
pub fn sample_gue_coupling(env_dim: usize, seed: &SeedPolicy) -> Result<ComplexMatrix> {
    ensure_env_dim(env_dim)?;
    let mut rng = seed.stream_rng(STREAM_COUPLING);
    Ok(draw_gue_matrix(env_dim, &mut rng))
}

fn draw_gue_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros((n, n));
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        v[(i, i)] = Complex64::new(d, 0.0);
        for j in (i + 1)..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
            v[(i, j)] = z;
            v[(j, i)] = z.conj();
        }
    }
    v
}

/// Strictly ascending spectrum with unit mean spacing, of the requested
/// kind. Invalid draws (ties, mean spacing off by more than
/// [`MEAN_SPACING_TOL`]) are logged, discarded, and redrawn from the same
/// stream.
pub fn sample_spectrum(env_dim: usize, kind: SpectrumKind, seed: &SeedPolicy) -> Result<Array1<f64>> {
    ensure_env_dim(env_dim)?;
    let mut rng = seed.stream_rng(STREAM_SPECTRUM);
    sample_spectrum_from(env_dim, kind, &mut rng)
}

fn sample_spectrum_from(
    env_dim: usize,
    kind: SpectrumKind,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    let mut last_reason = String::new();
    for attempt in 0..MAX_SAMPLE_ATTEMPTS {
        let candidate = match kind {
            SpectrumKind::GueUnfolded => match unfolded_gue_spectrum(env_dim, rng) {
                Ok(s) => s,
                Err(e) => {
                    last_reason = e.to_string();
                    log::warn!("discarding spectrum draw (attempt {attempt}): {last_reason}");
                    continue;
                }
            },
            SpectrumKind::PoissonUniform => poisson_spectrum(env_dim, rng),
        };
        match validate_spectrum(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(reason) => {
                last_reason = reason;
                log::warn!("discarding spectrum draw (attempt {attempt}): {last_reason}");
            }
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "no valid spectrum in {MAX_SAMPLE_ATTEMPTS} draws (last: {last_reason})"
    )))
}

fn unfolded_gue_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Result<Array1<f64>> {
    use ndarray_linalg::{EigValshInto, UPLO};
    let h = draw_gue_matrix(n, rng);
    // Eigenvalues only; the conjugation quirk of the eigenvector path is
    // irrelevant here because conj(A) has the same (real) spectrum.
    let raw = h
        .eigvalsh_into(UPLO::Lower)
        .map_err(|e| Error::ConvergenceFailure(format!("zheev (values): {e}")))?;
    Ok(unfold_semicircle(&raw, n))
}

/// Map raw GUE eigenvalues to unit mean spacing through the integrated
/// semicircle density: `x = n * F(E)` with
/// `F(E) = 1/2 + [E sqrt(R^2 - E^2)/R^2 + asin(E/R)] / pi`, `R = 2 sqrt(n)`.
/// Eigenvalues are clamped to `[-R, R]` first; finite-n fluctuations push
/// edge levels slightly outside the limiting support.
fn unfold_semicircle(eigenvalues: &Array1<f64>, n: usize) -> Array1<f64> {
    let scale = n as f64;
    let radius = 2.0 * scale.sqrt();
    eigenvalues.mapv(|e| {
        let x = (e / radius).clamp(-1.0, 1.0);
        scale * (0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI)
    })
}

fn poisson_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut pts: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * n as f64).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
    Array1::from_vec(pts)
}

fn validate_spectrum(spectrum: &Array1<f64>) -> std::result::Result<(), String> {
    let n = spectrum.len();
    if n < 2 {
        return Err(format!("spectrum has {n} levels, need at least 2"));
    }
    if spectrum.windows(2).into_iter().any(|w| w[0] >= w[1]) {
        return Err("spectrum not strictly ascending".into());
    }
    let mean_spacing = (spectrum[n - 1] - spectrum[0]) / (n - 1) as f64;
    if (mean_spacing - 1.0).abs() > MEAN_SPACING_TOL {
        return Err(format!(
            "mean spacing {mean_spacing:.4} outside 1 +- {MEAN_SPACING_TOL}"
        ));
    }
    Ok(())
}

/// Haar-like random environment state: a complex Gaussian vector
/// normalized to unit norm.
pub fn sample_env_state(env_dim: usize, seed: &SeedPolicy) -> Result<Array1<Complex64>> {
    ensure_env_dim(env_dim)?;
    let mut rng = seed.stream_rng(STREAM_STATE);
    sample_env_state_from(env_dim, &mut rng)
}

fn sample_env_state_from(env_dim: usize, rng: &mut ChaCha8Rng) -> Result<Array1<Complex64>> {
    for attempt in 0..MAX_SAMPLE_ATTEMPTS {
        let mut v = Array1::from_iter((0..env_dim).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        }));
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.map_inplace(|z| *z /= norm);
            return Ok(v);
        }
        log::warn!("discarding zero-norm state draw (attempt {attempt})");
    }
    Err(Error::ConvergenceFailure(format!(
        "no normalizable state vector in {MAX_SAMPLE_ATTEMPTS} draws"
    )))
}

/// Normalized histogram of nearest-neighbor spacings pooled over a set of
/// spectra.
#[derive(Debug, Clone)]
pub struct SpacingHistogram {
    pub bin_centers: Vec<f64>,
    /// Probability density per bin; `sum(density) * bin_width = 1`.
    pub density: Vec<f64>,
    pub bin_width: f64,
    pub n_spacings: usize,
}

/// Consecutive-level spacings of one spectrum.
pub fn nearest_neighbor_spacings(spectrum: &Array1<f64>) -> Vec<f64> {
    spectrum.windows(2).into_iter().map(|w| w[1] - w[0]).collect()
}

/// Pool the nearest-neighbor spacings of all given spectra and bin them
/// into a normalized density over `[0, max_spacing]`.
pub fn spacing_histogram(spectra: &[Array1<f64>], bins: usize) -> Result<SpacingHistogram> {
    if bins == 0 {
        return Err(Error::OutOfRange {
            name: "bins",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    let spacings: Vec<f64> = spectra.iter().flat_map(nearest_neighbor_spacings).collect();
    if spacings.is_empty() {
        return Err(Error::EmptyInput("no spacings: need spectra with >= 2 levels"));
    }
    let max = spacings.iter().fold(0.0f64, |m, &s| m.max(s));
    if max <= 0.0 {
        return Err(Error::EmptyInput("all spacings are zero"));
    }
    let bin_width = max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &spacings {
        let k = ((s / bin_width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = spacings.len() as f64;
    Ok(SpacingHistogram {
        bin_centers: (0..bins).map(|k| (k as f64 + 0.5) * bin_width).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * bin_width)).collect(),
        bin_width,
        n_spacings: spacings.len(),
    })
}
