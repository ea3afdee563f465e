//! Closed-form linear-response theory for the averaged qubit dynamics.
//!
//! At weak coupling the ensemble-averaged interaction-picture matrix
//! elements are governed by correlation integrals of the environment's
//! spectral two-point function
//!
//! ```text
//! c(u) = 1 + delta(u / 2 pi) - b2(u / 2 pi),      b2(tau) = max(0, 1 - tau)
//! ```
//!
//! folded against a case-dependent kernel over the ordered time simplex.
//! The boundary delta spike at u = 0 contributes half its mass, i.e.
//! weight `pi` times the kernel at zero; this convention is load-bearing
//! for every closed form here and is exactly what [`quadrature_oracle`]
//! implements independently.
//!
//! Four cases are covered, all with a GUE environment:
//!
//! * [`LrCase::DephasingOffdiag`]: coupling along z, initial coherence.
//!   `<rho~21(t)> = rho21(0) * (1 - 4 mu^2 C_fid(t))` with [`c_fid`].
//! * [`LrCase::XInit`] and [`LrCase::YInit`]: coupling along x, initial
//!   state along +x or +y. `<rho~21> = (1/2)(1 - 4 mu^2 C_x)` and
//!   `(i/2)(1 - 4 mu^2 C_y)` with the complex integrals [`c_x`], [`c_y`].
//! * [`LrCase::ZInit`]: coupling along x, initial state +z; here the
//!   coherence stays zero and the population moves:
//!   `<rho~11> = 1 - 2 mu^2 C_z` with the real [`c_z`].
//!
//! All predictions are interaction-picture values. The free qubit
//! rotation multiplies the lower off-diagonal element by `e^{i delta t}`
//! on the way back to the Schroedinger picture; [`LrCurve::to_series`]
//! applies exactly that dressing and nothing else.
//!
//! # Numerical branches
//!
//! The printed closed forms carry `1/delta^2` and `1/delta^3` prefactors
//! that cancel between terms, so for small `delta` they lose precision in
//! f64. Below the validated threshold `delta * max(t, 2 pi) < 0.05` the
//! implementation switches to exact series expansions in `delta` (through
//! sixth order), which overlap the closed forms to better than 1e-9
//! relative error across the switchover band and extend smoothly to
//! `delta = 0`.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::propagation::{AveragedSeries, TimeGrid};
use crate::{Error, Result};

mod quadrature;
pub use quadrature::{integrate_complex, quadrature_oracle};

/// Which averaged matrix element a linear-response prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrCase {
    /// Coupling along z, any initial coherence: pure dephasing of the
    /// off-diagonal element.
    DephasingOffdiag,
    /// Coupling along x, initial state +x: off-diagonal element.
    XInit,
    /// Coupling along x, initial state +y: off-diagonal element.
    YInit,
    /// Coupling along x, initial state +z: upper population.
    ZInit,
}

impl LrCase {
    pub const ALL: [LrCase; 4] = [
        LrCase::DephasingOffdiag,
        LrCase::XInit,
        LrCase::YInit,
        LrCase::ZInit,
    ];

    /// Short machine-readable name, used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            LrCase::DephasingOffdiag => "dephasing",
            LrCase::XInit => "x_init",
            LrCase::YInit => "y_init",
            LrCase::ZInit => "z_init",
        }
    }
}

/// Ensemble selector for the spectral correlation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrelationParams {
    beta: u8,
}

impl CorrelationParams {
    /// `beta` is the Dyson index: 2 for the unitary ensemble, 1 for the
    /// orthogonal one.
    pub fn new(beta: u8) -> Result<Self> {
        if beta != 1 && beta != 2 {
            return Err(Error::UnsupportedEnsemble(beta));
        }
        Ok(Self { beta })
    }

    pub fn gue() -> Self {
        Self { beta: 2 }
    }

    pub fn beta(&self) -> u8 {
        self.beta
    }
}

/// Switch to the small-delta series when `delta * max(t, 2 pi)` is below
/// this (see the module docs).
const SERIES_THRESHOLD: f64 = 0.05;

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(())
}

/// GUE two-point form factor `b2(tau) = 1 - tau` for `tau < 1`, zero
/// beyond; continuous at `tau = 1`.
pub fn form_factor_b2(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    Ok((1.0 - tau).max(0.0))
}

/// Regular (non-delta) part of the spectral correlation function at time
/// separation `u`.
///
/// For `beta = 2` this is `1 - b2(u / 2 pi)`, the form every closed form
/// in this module integrates. For `beta = 1` there is no closed-form
/// support here; the returned `2 - b2(u / 2 pi)` keeps the `(3 - beta)`
/// offset but still uses the GUE form factor, so it is only a rough
/// exploratory stand-in and is not consumed anywhere else in the crate.
pub fn correlation_regular(u: f64, params: CorrelationParams) -> Result<f64> {
    let b2 = form_factor_b2(u / TAU)?;
    Ok(match params.beta {
        2 => 1.0 - b2,
        _ => 2.0 - b2,
    })
}

/// Dephasing correlation integral: the simplex double integral of `c`
/// alone. `pi t + t^3 / (12 pi)` up to the Heisenberg time, then
/// `t^2 / 2 + 2 pi^2 / 3`.
pub fn c_fid(t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(if t < TAU {
        PI * t + t.powi(3) / (12.0 * PI)
    } else {
        0.5 * t * t + 2.0 * PI * PI / 3.0
    })
}

fn closed_c_x(t: f64, d: f64) -> Complex64 {
    let i = Complex64::I;
    let one = Complex64::ONE;
    let pi_d = PI * d;
    let e_mdt = Complex64::cis(-d * t);
    let e_m2dt = Complex64::cis(-2.0 * d * t);

    let cbar = (4.0 * (one - e_mdt) - (one - i * pi_d) * (one - e_m2dt)
        - 2.0 * d * t * (i - pi_d))
        / (4.0 * d * d);

    let common = (one - 2.0 * PI * d * i) * (d * t) + 3.0 * pi_d + 2.5 * i
        + (pi_d - 0.5 * i) * e_m2dt;
    let branch = if t < TAU {
        (2.0 * d * (t - TAU) - 2.0 * i) * e_mdt
    } else {
        (d * (TAU - t) - 2.5 * i) * Complex64::cis(-TAU * d)
            + 0.5 * i * Complex64::cis(2.0 * d * (PI - t))
    };
    let b = (common + branch) / (4.0 * PI * d.powi(3));
    cbar - b
}

fn series_c_x(t: f64, d: f64) -> Complex64 {
    let d2 = d * d;
    let p = PI;
    if t < TAU {
        let c1 = t * t * (t * t + 24.0 * p * p) / (48.0 * p);
        let c2 = t.powi(5) / (60.0 * p) + p * t.powi(3) / 3.0;
        let c3 = t.powi(4) * (-11.0 * t * t - 240.0 * p * p) / (1440.0 * p);
        let c4 = -13.0 * t.powi(7) / (5040.0 * p) - p * t.powi(5) / 15.0;
        let c5 = t.powi(6) * (57.0 * t * t + 1792.0 * p * p) / (80640.0 * p);
        let c6 = t.powi(9) / (6048.0 * p) + 2.0 * p * t.powi(7) / 315.0;
        Complex64::new(d2 * (c2 + d2 * (c4 + d2 * c6)), d * (c1 + d2 * (c3 + d2 * c5)))
    } else {
        let c1 = (t.powi(3) + 4.0 * p * p * t - 2.0 * p.powi(3)) / 6.0;
        let c2 = t.powi(4) / 8.0 + p * p * t * t / 3.0 - 2.0 * p.powi(4) / 15.0;
        let c3 = (-21.0 * t.powi(5) - 80.0 * p * p * t.powi(3) + 60.0 * p.powi(3) * t * t
            - 48.0 * p.powi(4) * t
            + 32.0 * p.powi(5))
            / 360.0;
        let c4 = -t.powi(6) / 48.0 - p * p * t.powi(4) / 9.0 + p.powi(3) * t.powi(3) / 9.0
            - p.powi(4) * t * t / 15.0
            + 8.0 * p.powi(6) / 315.0;
        let c5 = (31.0 * t.powi(7) + 224.0 * p * p * t.powi(5) - 280.0 * p.powi(3) * t.powi(4)
            + 224.0 * p.powi(4) * t.powi(3)
            - 112.0 * p.powi(5) * t * t
            + 64.0 * p.powi(6) * t
            - 48.0 * p.powi(7))
            / 5040.0;
        let c6 = t.powi(8) / 640.0 + 2.0 * p * p * t.powi(6) / 135.0 - p.powi(3) * t.powi(5) / 45.0
            + p.powi(4) * t.powi(4) / 45.0
            - 2.0 * p.powi(5) * t.powi(3) / 135.0
            + 2.0 * p.powi(6) * t * t / 315.0
            - 2.0 * p.powi(8) / 945.0;
        Complex64::new(d2 * (c2 + d2 * (c4 + d2 * c6)), d * (c1 + d2 * (c3 + d2 * c5)))
    }
}

/// Correlation integral for an initial +x state under x coupling.
/// Complex; vanishes identically in the `delta -> 0` limit.
pub fn c_x(t: f64, delta: f64) -> Result<Complex64> {
    check_time(t)?;
    check_delta(delta)?;
    Ok(if delta * t.max(TAU) < SERIES_THRESHOLD {
        series_c_x(t, delta)
    } else {
        closed_c_x(t, delta)
    })
}

fn closed_c_y(t: f64, d: f64) -> Complex64 {
    let i = Complex64::I;
    let one = Complex64::ONE;
    let pi_d = PI * d;
    let e_mdt = Complex64::cis(-d * t);
    let e_m2dt = Complex64::cis(-2.0 * d * t);

    let cbar = (2.0 * d * t * (pi_d - i) + (one - i * pi_d) * (one - e_m2dt)) / (4.0 * d * d);

    let common = (one - 2.0 * PI * d * i) * (d * t) + pi_d + 1.5 * i + (0.5 * i - pi_d) * e_m2dt;
    let branch = if t < TAU {
        2.0 * i * e_mdt
    } else {
        0.5 * i * Complex64::cis(2.0 * d * (PI - t))
            + (1.5 * i - (TAU - t) * d) * Complex64::cis(-TAU * d)
    };
    let b = (common - branch) / (4.0 * PI * d.powi(3));
    cbar - b
}

fn series_c_y(t: f64, d: f64) -> Complex64 {
    let d2 = d * d;
    let p = PI;
    let fid = if t < TAU {
        p * t + t.powi(3) / (12.0 * p)
    } else {
        0.5 * t * t + 2.0 * p * p / 3.0
    };
    if t < TAU {
        let c1 = t * t * (-t * t - 8.0 * p * p) / (16.0 * p);
        let c2 = -7.0 * t.powi(5) / (240.0 * p) - p * t.powi(3) / 3.0;
        let c3 = t.powi(4) * (t * t + 16.0 * p * p) / (96.0 * p);
        let c4 = 31.0 * t.powi(7) / (10080.0 * p) + p * t.powi(5) / 15.0;
        let c5 = t.powi(6) * (-t * t / 1280.0 - p * p / 45.0) / p;
        let c6 = t.powi(7) * (-127.0 * t * t - 4608.0 * p * p) / (725760.0 * p);
        Complex64::new(
            fid + d2 * (c2 + d2 * (c4 + d2 * c6)),
            d * (c1 + d2 * (c3 + d2 * c5)),
        )
    } else {
        let c1 = (-t.powi(3) - p.powi(3)) / 3.0;
        let c2 = -t.powi(4) / 6.0 - p * p * t * t / 3.0 + p.powi(3) * t / 3.0 - 4.0 * p.powi(4) / 15.0;
        let c3 = (6.0 * t.powi(5) + 20.0 * p * p * t.powi(3) - 15.0 * p.powi(3) * t * t
            + 8.0 * p.powi(5))
            / 90.0;
        let c4 = t.powi(6) / 45.0 + p * p * t.powi(4) / 9.0 - p.powi(3) * t.powi(3) / 9.0
            + p.powi(4) * t * t / 15.0
            - 2.0 * p.powi(5) * t / 45.0
            + 4.0 * p.powi(6) / 105.0;
        let c5 = (-4.0 * t.powi(7) - 28.0 * p * p * t.powi(5) + 35.0 * p.powi(3) * t.powi(4)
            - 28.0 * p.powi(4) * t.powi(3)
            + 14.0 * p.powi(5) * t * t
            - 6.0 * p.powi(7))
            / 630.0;
        let c6 = -t.powi(8) / 630.0 - 2.0 * p * p * t.powi(6) / 135.0 + p.powi(3) * t.powi(5) / 45.0
            - p.powi(4) * t.powi(4) / 45.0
            + 2.0 * p.powi(5) * t.powi(3) / 135.0
            - 2.0 * p.powi(6) * t * t / 315.0
            + p.powi(7) * t / 315.0
            - 8.0 * p.powi(8) / 2835.0;
        Complex64::new(
            fid + d2 * (c2 + d2 * (c4 + d2 * c6)),
            d * (c1 + d2 * (c3 + d2 * c5)),
        )
    }
}

/// Correlation integral for an initial +y state under x coupling.
/// Complex; tends to [`c_fid`] as `delta -> 0`.
pub fn c_y(t: f64, delta: f64) -> Result<Complex64> {
    check_time(t)?;
    check_delta(delta)?;
    Ok(if delta * t.max(TAU) < SERIES_THRESHOLD {
        series_c_y(t, delta)
    } else {
        closed_c_y(t, delta)
    })
}

fn closed_c_z(t: f64, d: f64) -> f64 {
    let cbar = (1.0 - (d * t).cos()) / (d * d) + PI * t;
    let branch = if t < TAU {
        (d * t).sin() / (PI * d) + (1.0 - t / TAU) * (d * t).cos()
    } else {
        (TAU * d).sin() / (PI * d) - (1.0 - t / TAU) * (TAU * d).cos()
    };
    let b = (1.0 + t / TAU - branch) / (d * d);
    cbar - b
}

fn series_c_z(t: f64, d: f64) -> f64 {
    let d2 = d * d;
    let p = PI;
    if t < TAU {
        let fid = p * t + t.powi(3) / (12.0 * p);
        let c2 = -t.powi(5) / (80.0 * p);
        let c4 = t.powi(7) / (2016.0 * p);
        let c6 = -t.powi(9) / (103680.0 * p);
        fid + d2 * (c2 + d2 * (c4 + d2 * c6))
    } else {
        let fid = 0.5 * t * t + 2.0 * p * p / 3.0;
        let c2 = -t.powi(4) / 24.0 + p.powi(3) * t / 3.0 - 2.0 * p.powi(4) / 5.0;
        let c4 = t.powi(6) / 720.0 - 2.0 * p.powi(5) * t / 45.0 + 4.0 * p.powi(6) / 63.0;
        let c6 = -t.powi(8) / 40320.0 + p.powi(7) * t / 315.0 - 2.0 * p.powi(8) / 405.0;
        fid + d2 * (c2 + d2 * (c4 + d2 * c6))
    }
}

/// Correlation integral for an initial +z state under x coupling. Real;
/// tends to [`c_fid`] as `delta -> 0`.
pub fn c_z(t: f64, delta: f64) -> Result<f64> {
    check_time(t)?;
    check_delta(delta)?;
    Ok(if delta * t.max(TAU) < SERIES_THRESHOLD {
        series_c_z(t, delta)
    } else {
        closed_c_z(t, delta)
    })
}

/// Closed-form correlation integral with an explicit ensemble choice.
///
/// The closed forms exist for the unitary ensemble only; asking for
/// `beta = 1` is refused rather than silently evaluated with the GUE form
/// factor.
pub fn correlation_closed_form(
    case: LrCase,
    t: f64,
    delta: f64,
    params: CorrelationParams,
) -> Result<Complex64> {
    if params.beta != 2 {
        return Err(Error::UnsupportedEnsemble(params.beta));
    }
    Ok(match case {
        LrCase::DephasingOffdiag => Complex64::new(c_fid(t)?, 0.0),
        LrCase::XInit => c_x(t, delta)?,
        LrCase::YInit => c_y(t, delta)?,
        LrCase::ZInit => Complex64::new(c_z(t, delta)?, 0.0),
    })
}

/// Linear-response prediction of the interaction-picture matrix element
/// for `case` (see the module docs for which element that is per case).
/// Every case is handled; the free-rotation dressing back to the
/// Schroedinger picture is the caller's separate step.
pub fn lr_predict(case: LrCase, t: f64, delta: f64, mu: f64) -> Result<Complex64> {
    check_mu(mu)?;
    let mu2 = mu * mu;
    Ok(match case {
        LrCase::DephasingOffdiag => Complex64::new(0.5 * (1.0 - 4.0 * mu2 * c_fid(t)?), 0.0),
        LrCase::XInit => 0.5 * (Complex64::ONE - 4.0 * mu2 * c_x(t, delta)?),
        LrCase::YInit => 0.5 * Complex64::I * (Complex64::ONE - 4.0 * mu2 * c_y(t, delta)?),
        LrCase::ZInit => Complex64::new(1.0 - 2.0 * mu2 * c_z(t, delta)?, 0.0),
    })
}

/// Exponentiated linear response: the same correlation integrals, resummed
/// as `1 - 4 mu^2 C -> e^{-4 mu^2 C}` so the prediction stays bounded at
/// long times.
///
/// For the population case the decay saturates at the asymptotic
/// polarization `fit_b` (obtained from [`fit_elr_offset`]):
///
/// ```text
/// <rho11(t)> = (1 + b)/2 + (1 - b)/2 * exp[-4 mu^2 C_z(t) / (1 - b)]
/// ```
///
/// which starts at 1 and tends to `(1 + b)/2`. The off-diagonal cases
/// never exceed modulus 1/2 because `Re C >= 0`.
pub fn elr_predict(
    case: LrCase,
    t: f64,
    delta: f64,
    mu: f64,
    fit_b: Option<f64>,
) -> Result<Complex64> {
    check_mu(mu)?;
    let mu2 = mu * mu;
    Ok(match case {
        LrCase::DephasingOffdiag => Complex64::new(0.5 * (-4.0 * mu2 * c_fid(t)?).exp(), 0.0),
        LrCase::XInit => 0.5 * (-4.0 * mu2 * c_x(t, delta)?).exp(),
        LrCase::YInit => 0.5 * Complex64::I * (-4.0 * mu2 * c_y(t, delta)?).exp(),
        LrCase::ZInit => {
            let b = fit_b.ok_or(Error::MissingFitParameter)?;
            if !(0.0..1.0).contains(&b) {
                return Err(Error::OutOfRange {
                    name: "fit_b",
                    value: b,
                    min: 0.0,
                    max: 1.0,
                });
            }
            let decay = (-4.0 * mu2 * c_z(t, delta)? / (1.0 - b)).exp();
            Complex64::new(0.5 * (1.0 + b) + 0.5 * (1.0 - b) * decay, 0.0)
        }
    })
}

/// A theory prediction evaluated on a time grid.
///
/// `values[k]` is the interaction-picture prediction at `grid.points()[k]`:
/// the off-diagonal element `rho~21` for the coherence cases, the upper
/// population `rho~11` for [`LrCase::ZInit`].
#[derive(Debug, Clone)]
pub struct LrCurve {
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
    pub case: LrCase,
    pub delta: f64,
    pub mu: f64,
    /// Whether the values are exponentiated (resummed) predictions.
    pub elr: bool,
    /// Asymptotic polarization used by the exponentiated population case.
    pub fit_b: Option<f64>,
}

impl LrCurve {
    /// Plain linear-response curve.
    pub fn linear(grid: &TimeGrid, case: LrCase, delta: f64, mu: f64) -> Result<Self> {
        let values = grid
            .points()
            .iter()
            .map(|&t| lr_predict(case, t, delta, mu))
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            values,
            case,
            delta,
            mu,
            elr: false,
            fit_b: None,
        })
    }

    /// Exponentiated curve; `fit_b` is required for the population case
    /// and ignored otherwise.
    pub fn exponentiated(
        grid: &TimeGrid,
        case: LrCase,
        delta: f64,
        mu: f64,
        fit_b: Option<f64>,
    ) -> Result<Self> {
        let values = grid
            .points()
            .iter()
            .map(|&t| elr_predict(case, t, delta, mu, fit_b))
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            values,
            case,
            delta,
            mu,
            elr: true,
            fit_b: if case == LrCase::ZInit { fit_b } else { None },
        })
    }

    /// Predicted Schroedinger-picture states: the free rotation dresses
    /// the off-diagonal element with `e^{i delta t}`, populations are 1/2
    /// each for the coherence cases and `(value, 1 - value)` for the
    /// population case. `n_run` is 0 to mark an analytic series.
    ///
    /// Exponentiated curves always yield physical states; plain
    /// linear-response values can leave the state space once `4 mu^2 C`
    /// exceeds order one, which distance observables will then reject.
    pub fn to_series(&self) -> AveragedSeries {
        let zeros = vec![crate::linalg::ComplexMatrix::zeros((2, 2)); self.grid.len()];
        let states = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| match self.case {
                LrCase::ZInit => {
                    let r = v.re;
                    ndarray::array![
                        [Complex64::new(r, 0.0), Complex64::ZERO],
                        [Complex64::ZERO, Complex64::new(1.0 - r, 0.0)]
                    ]
                }
                _ => {
                    let rho21 = Complex64::cis(self.delta * t) * v;
                    ndarray::array![
                        [Complex64::new(0.5, 0.0), rho21.conj()],
                        [rho21, Complex64::new(0.5, 0.0)]
                    ]
                }
            })
            .collect();
        AveragedSeries {
            grid: self.grid.clone(),
            mean_rho: states,
            stderr_rho: zeros,
            n_run: 0,
        }
    }
}

/// Least-squares fit of the asymptotic polarization `b` in the
/// exponentiated population prediction to a simulated population decay.
///
/// The series must be of the population kind (coherences near zero,
/// `rho11` decaying from 1). The residual is scanned over
/// `b in [0, 0.99]` and the best bracket is refined by golden-section
/// search.
pub fn fit_elr_offset(series: &AveragedSeries, delta: f64, mu: f64) -> Result<f64> {
    check_delta(delta)?;
    check_mu(mu)?;
    let r_sim: Vec<f64> = series.mean_rho.iter().map(|rho| rho[(0, 0)].re).collect();
    let cz: Vec<f64> = series
        .grid
        .points()
        .iter()
        .map(|&t| c_z(t, delta))
        .collect::<Result<_>>()?;
    let mu2 = mu * mu;
    let residual = |b: f64| -> f64 {
        cz.iter()
            .zip(&r_sim)
            .map(|(&c, &r)| {
                let pred = 0.5 * (1.0 + b) + 0.5 * (1.0 - b) * (-4.0 * mu2 * c / (1.0 - b)).exp();
                (r - pred).powi(2)
            })
            .sum()
    };

    const B_MAX: f64 = 0.99;
    const N_SCAN: usize = 199;
    let scan: Vec<f64> = (0..=N_SCAN)
        .map(|i| residual(B_MAX * i as f64 / N_SCAN as f64))
        .collect();
    let (best, &best_res) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("residuals are finite"))
        .expect("scan is non-empty");
    let worst = scan.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst - best_res <= 1e-12 * worst.max(1.0) {
        return Err(Error::DegenerateFit);
    }
    if best == N_SCAN {
        return Err(Error::FitDiverged(B_MAX));
    }

    // Golden-section refinement inside the winning bracket.
    let step = B_MAX / N_SCAN as f64;
    let mut lo = (best as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best + 1) as f64 * step).min(B_MAX);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = residual(x1);
    let mut f2 = residual(x2);
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = residual(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = residual(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}
