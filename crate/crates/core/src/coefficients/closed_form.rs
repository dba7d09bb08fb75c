//! Closed-form coefficients: `gamma(t)` exactly, `Delta(t)` through the
//! hypergeometric series, the Markovian limits and the high-temperature form.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::kernels::{default_matsubara_terms, delta_quad_at};
use super::ReservoirSpec;
use crate::specfun::{fbar, gbar};
use crate::{Error, Result};

/// Above this value of `exp(-nu_1 t)` the series route is not used.
pub const Z_SWITCH: f64 = 0.999;
/// Distance of `rc` to a positive integer below which the quadrature route is
/// used for `Delta`.
pub const RESONANCE_GUARD: f64 = 1e-3;
const RESONANCE_POLE: f64 = 1e-6;

/// Dissipation coefficient
/// `gamma(t) = alpha^2 r^2/(1+r^2) [1 - e^{-rt} cos t - r e^{-rt} sin t]`.
pub fn gamma_at(spec: &ReservoirSpec, t: f64) -> f64 {
    let e = (-spec.r * t).exp();
    spec.gamma_bar() * (1.0 - e * t.cos() - spec.r * e * t.sin())
}

/// Stationary values `(Delta_M, gamma_M)`.
pub fn markov_limits(spec: &ReservoirSpec) -> (f64, f64) {
    let g = spec.gamma_bar();
    (g / (0.5 / spec.theta).tanh(), g)
}

/// High-temperature diffusion coefficient
/// `2 alpha^2 theta r^2/(1+r^2) {1 - e^{-rt}[cos t - sin t / r]}`.
pub fn delta_high_t_at(spec: &ReservoirSpec, t: f64) -> f64 {
    let e = (-spec.r * t).exp();
    2.0 * spec.theta * spec.gamma_bar() * (1.0 - e * (t.cos() - t.sin() / spec.r))
}

/// Whether `rc` lies within `tol` of a positive integer.
pub fn is_near_resonance(spec: &ReservoirSpec, tol: f64) -> bool {
    let rc = spec.rc();
    let m = rc.round();
    m >= 1.0 && (rc - m).abs() < tol
}

/// `Delta(t)` from the hypergeometric representation. Valid for
/// `exp(-nu_1 t) <= 0.999` and `rc` away from positive integers.
pub fn delta_closed_at(spec: &ReservoirSpec, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::DomainError(format!("closed form needs t > 0, got {t}")));
    }
    let r0 = spec.r0();
    let rc = spec.rc();
    if is_near_resonance(spec, RESONANCE_POLE) {
        return Err(Error::ResonantCutoff { rc });
    }
    let z = (-spec.nu1() * t).exp();
    if z > Z_SWITCH {
        return Err(Error::DomainError(format!(
            "exp(-nu_1 t) = {z} above {Z_SWITCH}; use quadrature"
        )));
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let f_mrc = fbar(c(-rc, 0.0), z)?;
    let f_prc = fbar(c(rc, 0.0), z)?;
    let f_pi = fbar(c(0.0, r0), z)?;
    let f_mi = fbar(c(0.0, -r0), z)?;
    let g_mi = gbar(c(0.0, -r0), z)?;
    let g_pi = gbar(c(0.0, r0), z)?;

    let (sn, cs) = t.sin_cos();
    let e = (-spec.r * t).exp();
    let coth = 1.0 / (PI * r0).tanh();
    let cot = 1.0 / (PI * rc).tan();

    let cos_part = (f_mrc + f_prc - f_pi - f_mi) / (PI * r0);
    let sin_part = (c(r0, -1.0) * g_mi + c(r0, 1.0) * g_pi) * (z / (r0 * (1.0 + r0 * r0)))
        + (f_mrc - f_prc) / rc;
    let pole = cot * e * (spec.r * cs - sn);
    let bracket = c(coth - pole, 0.0) + cos_part * cs - sin_part * (sn / PI);

    let scale = coth.abs() + pole.abs() + cos_part.norm() + sin_part.norm();
    if bracket.im.abs() > 1e-10 * scale {
        log::warn!(
            "closed-form Delta has imaginary residue {} at t = {t}",
            bracket.im
        );
    }
    Ok(spec.gamma_bar() * bracket.re)
}

/// `Delta(t)` by the most appropriate route: exact zero at `t = 0`,
/// quadrature near `t = 0` or at a resonant cutoff, closed form otherwise.
pub fn delta_at(spec: &ReservoirSpec, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::DomainError(format!("time {t} must be finite and >= 0")));
    }
    if t == 0.0 || spec.alpha == 0.0 {
        return Ok(0.0);
    }
    let z = (-spec.nu1() * t).exp();
    if z > Z_SWITCH || is_near_resonance(spec, RESONANCE_GUARD) {
        return Ok(delta_quad_at(spec, t, default_matsubara_terms(spec), 1e-11)?.value);
    }
    delta_closed_at(spec, t)
}
