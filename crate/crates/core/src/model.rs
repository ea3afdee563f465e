//! The qubit + environment model: parameters, initial states, and
//! Hamiltonian assembly.
//!
//! The composite Hamiltonian for one environment realization is
//!
//! ```text
//! H = (delta/2) sigma_z (x) 1  +  1 (x) diag(spectrum)  +  mu * v (x) V
//! ```
//!
//! in the crate's qubit-major basis (see the crate docs), with `v` the
//! Pauli matrix along the coupling axis and `V` the GUE coupling draw.
//! The spectrum carries unit mean level spacing, so `delta` and `mu` are
//! dimensionless in those units and time runs in units where the
//! environment Heisenberg time is `2 pi`.

use ndarray::{array, Array1};
use num_complex::Complex64;

use crate::ensembles::{EnvironmentDraw, SpectrumKind};
use crate::linalg::{kron, ComplexMatrix};
use crate::{Error, Result};

/// A Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// The Pauli matrix along `axis`.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let o = Complex64::ZERO;
    let one = Complex64::ONE;
    let i = Complex64::I;
    match axis {
        Axis::X => array![[o, one], [one, o]],
        Axis::Y => array![[o, -i], [i, o]],
        Axis::Z => array![[one, o], [o, -one]],
    }
}

/// Direction of the qubit operator in the coupling term. Coupling along
/// y is unitarily equivalent to x and not represented separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingAxis {
    X,
    Z,
}

impl CouplingAxis {
    pub fn axis(self) -> Axis {
        match self {
            CouplingAxis::X => Axis::X,
            CouplingAxis::Z => Axis::Z,
        }
    }
}

/// Physical parameters of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Qubit level splitting, in units of the mean level spacing.
    pub delta: f64,
    /// Coupling strength.
    pub mu: f64,
    /// Number of environment levels.
    pub env_dim: usize,
    pub coupling_axis: CouplingAxis,
    pub spectrum_kind: SpectrumKind,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: self.delta,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
            });
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mu",
                value: self.mu,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if self.env_dim < 2 {
            return Err(Error::DimensionMismatch(format!(
                "env_dim = {} but the environment needs at least 2 levels",
                self.env_dim
            )));
        }
        Ok(())
    }
}

/// Tolerance below which a Bloch vector norm counts as exactly 1.
pub const BLOCH_NORM_TOL: f64 = 1e-12;

/// Initial qubit state given by its Bloch vector (inside or on the unit
/// ball; the environment side of the initial product state is random and
/// does not live here).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub bloch: [f64; 3],
}

impl InitialState {
    pub fn new(bloch: [f64; 3]) -> Result<Self> {
        let norm = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt();
        if !norm.is_finite() || norm > 1.0 + BLOCH_NORM_TOL {
            return Err(Error::BlochOutOfBall(norm));
        }
        Ok(Self { bloch })
    }

    /// The +1 eigenstate of the Pauli matrix along `axis`.
    pub fn pauli_plus(axis: Axis) -> Self {
        match axis {
            Axis::X => Self { bloch: [1.0, 0.0, 0.0] },
            Axis::Y => Self { bloch: [0.0, 1.0, 0.0] },
            Axis::Z => Self { bloch: [0.0, 0.0, 1.0] },
        }
    }

    /// The maximally mixed state.
    pub fn maximally_mixed() -> Self {
        Self { bloch: [0.0, 0.0, 0.0] }
    }

    pub fn bloch_norm(&self) -> f64 {
        let [x, y, z] = self.bloch;
        (x * x + y * y + z * z).sqrt()
    }

    /// Whether the state sits on the Bloch sphere (up to
    /// [`BLOCH_NORM_TOL`]), i.e. is pure.
    pub fn is_pure(&self) -> bool {
        (self.bloch_norm() - 1.0).abs() <= BLOCH_NORM_TOL
    }

    /// State vector of a pure initial state: `[cos(theta/2),
    /// sin(theta/2) e^{i phi}]` for Bloch angles `(theta, phi)`.
    pub fn pure_state_vector(&self) -> Result<Array1<Complex64>> {
        if !self.is_pure() {
            return Err(Error::NonPureInitial(self.bloch_norm()));
        }
        let [x, y, z] = self.bloch;
        let norm = self.bloch_norm();
        let theta = (z / norm).clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        Ok(Array1::from_vec(vec![
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ]))
    }
}

/// Density matrix `(1 + bloch . sigma) / 2` of a qubit state.
pub fn qubit_density(init: &InitialState) -> Result<ComplexMatrix> {
    let norm = init.bloch_norm();
    if !norm.is_finite() || norm > 1.0 + BLOCH_NORM_TOL {
        return Err(Error::BlochOutOfBall(norm));
    }
    let [x, y, z] = init.bloch;
    Ok(array![
        [
            Complex64::new(0.5 * (1.0 + z), 0.0),
            Complex64::new(0.5 * x, -0.5 * y)
        ],
        [
            Complex64::new(0.5 * x, 0.5 * y),
            Complex64::new(0.5 * (1.0 - z), 0.0)
        ]
    ])
}

/// Assemble the full `2 env_dim x 2 env_dim` Hamiltonian for one
/// realization.
pub fn build_hamiltonian(params: &ModelParams, draw: &EnvironmentDraw) -> Result<ComplexMatrix> {
    params.validate()?;
    let n = params.env_dim;
    if draw.spectrum.len() != n || draw.coupling.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "draw is for env_dim {} / coupling {:?}, params say {n}",
            draw.spectrum.len(),
            draw.coupling.dim()
        )));
    }

    let half_delta = Complex64::new(0.5 * params.delta, 0.0);
    let h_qubit = pauli(Axis::Z).mapv(|z| z * half_delta);
    let mut h_env = ComplexMatrix::zeros((n, n));
    for (i, &e) in draw.spectrum.iter().enumerate() {
        h_env[(i, i)] = Complex64::new(e, 0.0);
    }
    let v_qubit = pauli(params.coupling_axis.axis());

    let mut h = kron(&h_qubit, &ComplexMatrix::eye(n));
    h += &kron(&ComplexMatrix::eye(2), &h_env);
    let coupling_term = kron(&v_qubit, &draw.coupling).mapv(|z| z * params.mu);
    h += &coupling_term;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::SeedPolicy;
    use crate::linalg::{hermiticity_deviation, max_abs};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(n: usize, axis: CouplingAxis) -> ModelParams {
        ModelParams {
            delta: 1.0,
            mu: 0.1,
            env_dim: n,
            coupling_axis: axis,
            spectrum_kind: SpectrumKind::GueUnfolded,
        }
    }

    #[test]
    fn pauli_algebra() {
        let sx = pauli(Axis::X);
        let sy = pauli(Axis::Y);
        let sz = pauli(Axis::Z);
        // sigma_x sigma_y = i sigma_z
        let lhs = sx.dot(&sy);
        let rhs = sz.mapv(|z| z * Complex64::I);
        assert!(max_abs(&(&lhs - &rhs)) < 1e-15);
        for s in [&sx, &sy, &sz] {
            assert!(max_abs(&(&s.dot(s) - &ComplexMatrix::eye(2))) < 1e-15);
        }
    }

    #[test]
    fn density_of_x_plus() {
        let rho = qubit_density(&InitialState::pauli_plus(Axis::X)).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_abs_diff_eq!(rho[(i, j)].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(rho[(i, j)].im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bloch_ball_is_enforced() {
        assert!(matches!(
            InitialState::new([0.8, 0.8, 0.8]),
            Err(Error::BlochOutOfBall(_))
        ));
        assert!(InitialState::new([0.6, 0.0, 0.8]).is_ok());
    }

    #[test]
    fn mixed_state_has_no_pure_vector() {
        let half = InitialState::new([0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            half.pure_state_vector(),
            Err(Error::NonPureInitial(_))
        ));
    }

    /// Small deterministic draw; random sampling at env_dim = 3 would
    /// often violate the mean-spacing invariant, which only concentrates
    /// at realistic sizes.
    fn tiny_draw() -> EnvironmentDraw {
        let c = Complex64::new;
        let r3 = 3.0f64.sqrt().recip();
        let draw = EnvironmentDraw {
            spectrum: ndarray::array![0.5, 1.5, 2.5],
            coupling: ndarray::array![
                [c(1.0, 0.0), c(0.3, 0.4), c(0.0, 0.0)],
                [c(0.3, -0.4), c(-0.5, 0.0), c(0.0, 0.2)],
                [c(0.0, 0.0), c(0.0, -0.2), c(0.25, 0.0)]
            ],
            env_state: ndarray::array![c(r3, 0.0), c(0.0, r3), c(-r3, 0.0)],
        };
        draw.validate().unwrap();
        draw
    }

    #[test]
    fn hamiltonian_blocks_for_x_coupling() {
        let p = params(3, CouplingAxis::X);
        let draw = tiny_draw();
        let h = build_hamiltonian(&p, &draw).unwrap();
        assert_eq!(h.dim(), (6, 6));
        // Qubit-major: diagonal carries +-delta/2 + E_i, and the x
        // coupling sits purely in the off-diagonal qubit blocks.
        for i in 0..3 {
            assert_abs_diff_eq!(h[(i, i)].re, 0.5 + draw.spectrum[i], epsilon = 1e-14);
            assert_abs_diff_eq!(h[(3 + i, 3 + i)].re, -0.5 + draw.spectrum[i], epsilon = 1e-14);
            for j in 0..3 {
                let v = draw.coupling[(i, j)] * Complex64::new(0.1, 0.0);
                assert!((h[(i, 3 + j)] - v).norm() < 1e-14);
                if i != j {
                    assert!(h[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_blocks_for_z_coupling() {
        let p = params(3, CouplingAxis::Z);
        let draw = tiny_draw();
        let h = build_hamiltonian(&p, &draw).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                // No qubit-flipping block for z coupling.
                assert!(h[(i, 3 + j)].norm() < 1e-14);
                let v = draw.coupling[(i, j)] * Complex64::new(0.1, 0.0);
                let upper = h[(i, j)] - v;
                let lower = h[(3 + i, 3 + j)] + v;
                if i != j {
                    assert!(upper.norm() < 1e-14 && lower.norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_with_spectral_trace() {
        let p = params(20, CouplingAxis::X);
        let draw = EnvironmentDraw::sample(20, SpectrumKind::GueUnfolded, &SeedPolicy::new(11, 2))
            .unwrap();
        let h = build_hamiltonian(&p, &draw).unwrap();
        assert!(hermiticity_deviation(&h) < 1e-14);
        // Both Pauli factors are traceless, so tr H = 2 sum E_n.
        let tr: Complex64 = (0..40).map(|i| h[(i, i)]).sum();
        let expected = 2.0 * draw.spectrum.sum();
        assert_abs_diff_eq!(tr.re, expected, epsilon = 1e-10 * expected.abs().max(1.0));
        assert_abs_diff_eq!(tr.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_rejects_mismatched_draw() {
        let p = params(4, CouplingAxis::X);
        let draw = EnvironmentDraw::sample(3, SpectrumKind::GueUnfolded, &SeedPolicy::new(1, 0))
            .unwrap();
        assert!(matches!(
            build_hamiltonian(&p, &draw),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn params_validation() {
        let mut p = params(4, CouplingAxis::X);
        p.delta = 0.0;
        assert!(p.validate().is_err());
        let mut p = params(4, CouplingAxis::X);
        p.mu = -0.1;
        assert!(p.validate().is_err());
        let p = params(1, CouplingAxis::X);
        assert!(p.validate().is_err());
    }

    proptest! {
        // rho = psi psi^dagger for every pure state.
        #[test]
        fn pure_vector_matches_density(
            costh in -1.0f64..1.0,
            phi in 0.0f64..(2.0 * std::f64::consts::PI),
        ) {
            let sinth = (1.0 - costh * costh).sqrt();
            let init = InitialState::new([sinth * phi.cos(), sinth * phi.sin(), costh]).unwrap();
            let psi = init.pure_state_vector().unwrap();
            let rho = qubit_density(&init).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let outer = psi[i] * psi[j].conj();
                    prop_assert!((outer - rho[(i, j)]).norm() < 1e-12);
                }
            }
        }

        // Density matrices are valid states everywhere in the ball.
        #[test]
        fn density_is_a_state(
            r in 0.0f64..1.0,
            costh in -1.0f64..1.0,
            phi in 0.0f64..(2.0 * std::f64::consts::PI),
        ) {
            let sinth = (1.0 - costh * costh).sqrt();
            let init = InitialState::new([r * sinth * phi.cos(), r * sinth * phi.sin(), r * costh]).unwrap();
            let rho = qubit_density(&init).unwrap();
            let tr = rho[(0, 0)].re + rho[(1, 1)].re;
            prop_assert!((tr - 1.0).abs() < 1e-14);
            // Eigenvalues (1 +- r)/2 stay in [0, 1].
            prop_assert!(rho[(0, 0)].re >= -1e-15 && rho[(1, 1)].re >= -1e-15);
            let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
            prop_assert!(det >= -1e-15);
        }
    }
}
