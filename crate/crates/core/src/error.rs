use thiserror::Error;

/// Everything that can go wrong in this crate.
///
/// Validation failures (dimension mismatches, non-Hermitian inputs, out of
/// range parameters) are programmer-facing and carry enough context to
/// locate the bad argument. Numerical failures (eigensolver breakdown,
/// quadrature stagnation, degenerate fits) are rare and usually indicate a
/// pathological input rather than a bug.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix required to be Hermitian deviates from its adjoint by more
    /// than the stated tolerance (entrywise max modulus).
    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// The eigensolver failed, or its output violated the reconstruction
    /// or orthonormality residual bounds.
    #[error("eigendecomposition failed: {0}")]
    ConvergenceFailure(String),

    /// Array shapes are inconsistent with each other or with the stated
    /// dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An operation that needs at least one element got none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A Bloch vector lies outside the closed unit ball.
    #[error("Bloch vector norm {0} exceeds 1")]
    BlochOutOfBall(f64),

    /// Per-realization evolution starts from a pure product state, so the
    /// qubit part must sit on the Bloch sphere, not inside it.
    #[error("initial qubit state must be pure (|bloch| = 1), got |bloch| = {0}")]
    NonPureInitial(f64),

    /// A matrix that should be a density operator is not one.
    #[error("not a density matrix: {0}")]
    NotAState(String),

    /// A scalar argument fell outside its allowed interval.
    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Two time series that must share a grid do not.
    #[error("time grids differ: {0}")]
    GridMismatch(String),

    /// The requested tail window of a series contains fewer than two
    /// points.
    #[error("grid too short: tail fraction {tail_fraction} of {n_points} points leaves fewer than 2 samples")]
    GridTooShort { tail_fraction: f64, n_points: usize },

    /// Spectral form factors are defined for non-negative times only.
    #[error("negative time {0} passed to a form-factor evaluation")]
    NegativeTime(f64),

    /// Adaptive quadrature hit its subdivision limit before reaching the
    /// requested accuracy.
    #[error("quadrature did not converge: estimated error {achieved:.3e} above target {target:.3e}")]
    QuadratureNonConvergence { achieved: f64, target: f64 },

    /// The exponentiated prediction for a z-axis initial state needs the
    /// fitted asymptotic polarization, which was not supplied.
    #[error("exponentiated z-init prediction requires a fitted offset parameter")]
    MissingFitParameter,

    /// The offset fit ran to the edge of its search range without finding
    /// an interior minimum.
    #[error("offset fit diverged: no interior minimum in [0, {0}]")]
    FitDiverged(f64),

    /// The offset fit residual does not depend on the offset, so no value
    /// is better than any other (happens at mu = 0 where nothing decays).
    #[error("offset fit is degenerate: residual is independent of the offset")]
    DegenerateFit,

    /// Closed-form spectral correlations are implemented for the unitary
    /// ensemble only.
    #[error("unsupported ensemble: beta = {0} has no closed-form correlation here (only beta = 2)")]
    UnsupportedEnsemble(u8),
}
