//! Second-order master-equation coefficients for an oscillator coupled to an
//! Ohmic bath with a Lorentz-Drude cutoff.
//!
//! Units: `hbar = k_B = omega_0 = 1`. Times are in `1/omega_0`, rates in
//! `omega_0`, and the temperature enters as `theta = kT / omega_0`.

mod closed_form;
mod grid;
mod kernels;

use std::f64::consts::PI;

pub use closed_form::{
    delta_at, delta_closed_at, delta_high_t_at, gamma_at, is_near_resonance, markov_limits,
};
pub use grid::{build_grid, log_grid, uniform_grid, CoefficientGrid, GridOptions};
pub use kernels::{
    default_matsubara_terms, delta_quad_at, kernel_kappa, kernel_mu, pi_at, quadrature_columns,
    rshift_at, QuadColumns, QuadEstimate,
};

use crate::{Error, Result};

/// Coupling `alpha`, cutoff ratio `r = omega_c / omega_0` and temperature
/// `theta = kT / omega_0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReservoirSpec {
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
}

impl ReservoirSpec {
    /// Validated constructor. `alpha = 0` is accepted as the decoupled limit.
    pub fn new(alpha: f64, r: f64, theta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be >= 0")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("r = {r} must be > 0")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta = {theta} must be > 0")));
        }
        Ok(Self { alpha, r, theta })
    }

    /// Temperature given through `r0 = omega_0 / (2 pi kT)`.
    pub fn from_r0(alpha: f64, r: f64, r0: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidParameter(format!("r0 = {r0} must be > 0")));
        }
        Self::new(alpha, r, 1.0 / (2.0 * PI * r0))
    }

    /// Temperature given through `r0 = omega_0 / kT` (no factor of 2 pi).
    pub fn from_r0_no_2pi(alpha: f64, r: f64, r0: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidParameter(format!("r0 = {r0} must be > 0")));
        }
        Self::new(alpha, r, 1.0 / r0)
    }

    /// Temperature given through `rc = omega_c / (2 pi kT)`.
    pub fn from_rc(alpha: f64, r: f64, rc: f64) -> Result<Self> {
        if !(rc.is_finite() && rc > 0.0) {
            return Err(Error::InvalidParameter(format!("rc = {rc} must be > 0")));
        }
        Self::new(alpha, r, r / (2.0 * PI * rc))
    }

    pub fn r0(&self) -> f64 {
        1.0 / (2.0 * PI * self.theta)
    }

    pub fn rc(&self) -> f64 {
        self.r / (2.0 * PI * self.theta)
    }

    /// Matsubara frequency `nu_n = 2 pi n theta`.
    pub fn nu(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 * self.theta
    }

    pub fn nu1(&self) -> f64 {
        self.nu(1)
    }

    /// True when the coupling is outside the weak-coupling regime.
    pub fn strong_coupling_advisory(&self) -> bool {
        self.alpha > 0.1
    }

    /// `alpha^2 r^2 / (1 + r^2)`, the stationary dissipation rate.
    pub fn gamma_bar(&self) -> f64 {
        self.alpha * self.alpha * self.r * self.r / (1.0 + self.r * self.r)
    }
}

/// Characteristic time scales of the model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Timescales {
    /// Oscillator period scale `1/omega_0`.
    pub system: f64,
    /// Reservoir correlation time `1/omega_c`.
    pub reservoir: f64,
    /// Thermal time `1/nu_1`.
    pub thermal: f64,
    /// Thermalization time `1/gamma_bar`.
    pub relaxation: f64,
}

impl Timescales {
    pub fn of(spec: &ReservoirSpec) -> Self {
        Self {
            system: 1.0,
            reservoir: 1.0 / spec.r,
            thermal: 1.0 / spec.nu1(),
            relaxation: 1.0 / spec.gamma_bar(),
        }
    }
}
