//! Decoherence of a single qubit coupled to a random-matrix environment.
//!
//! The model is a two-level system with splitting `delta` coupled, with
//! strength `mu`, to an environment whose Hamiltonian is drawn from a
//! random-matrix ensemble:
//!
//! ```text
//! H = (delta/2) sigma_z (x) 1  +  1 (x) H_env  +  mu * v (x) V
//! ```
//!
//! where `v` is a Pauli matrix on the qubit (the coupling axis), `V` is a
//! GUE random matrix, and `H_env` is diagonal with an unfolded random
//! spectrum. Two things are computed for this model:
//!
//! * ensemble-averaged reduced dynamics of the qubit, by exact
//!   diagonalization of sampled realizations ([`propagation`]), and
//! * closed-form linear-response predictions for the same averages, valid
//!   at weak coupling ([`linear_response`]).
//!
//! # Conventions
//!
//! All conventions below are fixed once, here, and used everywhere.
//!
//! * **Units.** Environment spectra are unfolded to unit mean level
//!   spacing, and time is measured in units of the inverse mean spacing
//!   (hbar = 1). The Heisenberg time of the environment is `t_H = 2*pi`.
//! * **Basis ordering.** The composite Hilbert space is qubit (x)
//!   environment, qubit-major: basis index `i = q * env_dim + n` for qubit
//!   level `q` in `{0, 1}` and environment level `n`. Qubit level 0 is
//!   spin up (`sigma_z` eigenvalue +1).
//! * **Qubit states.** Density matrices are written in that basis as
//!   `[[rho11, rho12], [rho21, rho22]]`, so `rho21 = <down|rho|up>` is the
//!   coherence whose ensemble average the linear-response formulas
//!   predict, and the Bloch vector is `x = 2 Re rho21`, `y = 2 Im rho21`,
//!   `z = rho11 - rho22`.
//! * **Spectral correlations.** The GUE two-point form factor is
//!   `b2(tau) = (1 - tau) for tau < 1, else 0`, with `tau = t / (2*pi)`.
//!
//! The [`linalg`] module documents the numerical invariants (Hermiticity
//! tolerances, eigendecomposition residuals) shared by all modules.

// Ensure the OpenBLAS backend is linked even though nothing names it directly;
// ndarray's BLAS dispatch and ndarray-linalg's LAPACK calls both resolve to it.
extern crate blas_src;
extern crate openblas_src;

pub mod ensembles;
mod error;
pub mod linalg;
pub mod linear_response;
pub mod model;
pub mod observables;
pub mod propagation;

pub use error::Error;

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
