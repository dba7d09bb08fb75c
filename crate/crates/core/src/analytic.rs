//! Secular-approximation observables built from a [`CoefficientGrid`].
//!
//! All of them depend on the reservoir only through `Gamma(t)` and
//! `Delta_Gamma(t)`, interpolated linearly between grid nodes.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::coefficients::{CoefficientGrid, ReservoirSpec};
use crate::{io, Error, Result};

/// Moments of the initial oscillator state in the dimensionless quadratures
/// `X = (a + a^dag)/sqrt 2`, `P = (a - a^dag)/(i sqrt 2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InitialStateMoments {
    pub n0: f64,
    /// Mandel Q of the initial state (0 by convention for the vacuum).
    pub q0: f64,
    pub var_x0: f64,
    pub var_p0: f64,
    /// Symmetrized covariance `<XP + PX>/2 - <X><P>`.
    pub cov0: f64,
    /// Coherent amplitude, zero when not applicable.
    #[serde(serialize_with = "ser_complex")]
    pub center: Complex64,
}

fn ser_complex<S: serde::Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&c.re)?;
    t.serialize_element(&c.im)?;
    t.end()
}

impl InitialStateMoments {
    pub fn ground() -> Self {
        Self {
            n0: 0.0,
            q0: 0.0,
            var_x0: 0.5,
            var_p0: 0.5,
            cov0: 0.0,
            center: Complex64::new(0.0, 0.0),
        }
    }

    pub fn fock(n: u32) -> Self {
        let n = n as f64;
        Self {
            n0: n,
            q0: if n == 0.0 { 0.0 } else { -1.0 },
            var_x0: n + 0.5,
            var_p0: n + 0.5,
            cov0: 0.0,
            center: Complex64::new(0.0, 0.0),
        }
    }

    pub fn coherent(alpha0: Complex64) -> Self {
        Self {
            n0: alpha0.norm_sqr(),
            q0: 0.0,
            var_x0: 0.5,
            var_p0: 0.5,
            cov0: 0.0,
            center: alpha0,
        }
    }

    /// Squeezed vacuum with `var_x0 = s/2`, `var_p0 = 1/(2s)`.
    pub fn squeezed(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("squeezing s = {s} must be > 0")));
        }
        let n0 = 0.25 * (s + 1.0 / s) - 0.5;
        Ok(Self {
            n0,
            q0: if n0 > 0.0 { 2.0 * n0 + 1.0 } else { 0.0 },
            var_x0: 0.5 * s,
            var_p0: 0.5 / s,
            cov0: 0.0,
            center: Complex64::new(0.0, 0.0),
        })
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidParameter(format!("nbar = {nbar} must be >= 0")));
        }
        Ok(Self {
            n0: nbar,
            q0: nbar,
            var_x0: nbar + 0.5,
            var_p0: nbar + 0.5,
            cov0: 0.0,
            center: Complex64::new(0.0, 0.0),
        })
    }

    /// Checks the uncertainty relation and the ranges of `n0`, `q0`.
    pub fn validate(&self) -> Result<()> {
        let det = self.var_x0 * self.var_p0 - self.cov0 * self.cov0;
        if !(self.var_x0 > 0.0 && self.var_p0 > 0.0 && det >= 0.25 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "variances ({}, {}, {}) violate the uncertainty relation",
                self.var_x0, self.var_p0, self.cov0
            )));
        }
        if !(self.n0 >= 0.0 && self.q0 >= -1.0) {
            return Err(Error::InvalidParameter(format!(
                "need n0 >= 0 and q0 >= -1 (got {}, {})",
                self.n0, self.q0
            )));
        }
        Ok(())
    }
}

/// Isotropic Gaussian Wigner function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWigner {
    pub center: Complex64,
    /// `Delta_Gamma(t) + 1/2`.
    pub width: f64,
}

impl GaussianWigner {
    /// `W(alpha) = exp(-|alpha - center|^2 / width) / (pi width)`.
    pub fn eval(&self, alpha: Complex64) -> f64 {
        (-(alpha - self.center).norm_sqr() / self.width).exp() / (PI * self.width)
    }
}

/// `<n(t)> = e^{-Gamma} n0 + (e^{-Gamma} - 1)/2 + Delta_Gamma`.
pub fn heating_at(grid: &CoefficientGrid, n0: f64, t: f64) -> Result<f64> {
    let s = grid.sample(t)?;
    let e = (-s.big_gamma).exp();
    Ok(e * n0 + 0.5 * (e - 1.0) + s.delta_big_gamma)
}

/// Markovian heating with stationary coefficients: relaxation at rate
/// `2 gamma_M` towards the thermal occupation.
pub fn heating_markov(spec: &ReservoirSpec, n0: f64, t: f64) -> f64 {
    let e = (-2.0 * spec.gamma_bar() * t).exp();
    e * n0 + thermal_n(spec) * (1.0 - e)
}

/// Short-time heating of the ground state, `int_0^t (Delta - gamma)`.
pub fn heating_short_time(grid: &CoefficientGrid, t: f64) -> Result<f64> {
    let s = grid.sample(t)?;
    if s.big_gamma > 0.05 {
        log::warn!("Gamma({t}) = {} is not small; short-time form is inaccurate", s.big_gamma);
    }
    Ok(s.i_minus)
}

/// Rotation of the initial variances without damping.
pub fn free_position_variance(m: &InitialStateMoments, t: f64) -> f64 {
    let (sn, cs) = t.sin_cos();
    m.var_x0 * cs * cs + m.var_p0 * sn * sn + m.cov0 * (2.0 * t).sin()
}

/// `(Delta X)^2_t = e^{-Gamma}[var_x0 cos^2 t + var_p0 sin^2 t + cov0 sin 2t] + Delta_Gamma`.
pub fn position_variance_at(grid: &CoefficientGrid, m: &InitialStateMoments, t: f64) -> Result<f64> {
    let s = grid.sample(t)?;
    Ok((-s.big_gamma).exp() * free_position_variance(m, t) + s.delta_big_gamma)
}

/// `Q(t) = [<n>^2 + e^{-2 Gamma} n0 (q0 - n0)] / <n>`.
pub fn mandel_q_at(grid: &CoefficientGrid, n0: f64, q0: f64, t: f64) -> Result<f64> {
    let s = grid.sample(t)?;
    let e = (-s.big_gamma).exp();
    let n = e * n0 + 0.5 * (e - 1.0) + s.delta_big_gamma;
    if n.abs() < 1e-300 {
        return Err(Error::DegenerateState(n));
    }
    Ok((n * n + e * e * n0 * (q0 - n0)) / n)
}

/// Wigner function of an initially coherent state `|alpha0>`.
pub fn wigner_coherent(grid: &CoefficientGrid, alpha0: Complex64, t: f64) -> Result<GaussianWigner> {
    let s = grid.sample(t)?;
    Ok(GaussianWigner {
        center: alpha0 * (-0.5 * s.big_gamma).exp() * Complex64::from_polar(1.0, -t),
        width: s.delta_big_gamma + 0.5,
    })
}

/// Characteristic function at time `t` from the initial one `chi0`.
pub fn qcf_at(
    grid: &CoefficientGrid,
    chi0: impl Fn(f64, f64) -> Complex64,
    t: f64,
    x: f64,
    p: f64,
) -> Result<Complex64> {
    let s = grid.sample(t)?;
    let (sn, cs) = t.sin_cos();
    let xr = x * cs + p * sn;
    let pr = -x * sn + p * cs;
    let a = (-0.5 * s.big_gamma).exp();
    Ok((-0.5 * s.delta_big_gamma * (x * x + p * p)).exp() * chi0(a * xr, a * pr))
}

/// Characteristic function of a thermal state with occupation `nbar`.
pub fn thermal_chi(nbar: f64) -> impl Fn(f64, f64) -> Complex64 {
    move |x, p| Complex64::new((-0.5 * (nbar + 0.5) * (x * x + p * p)).exp(), 0.0)
}

/// Bose occupation `1 / (e^{1/theta} - 1)`.
pub fn thermal_n(spec: &ReservoirSpec) -> f64 {
    1.0 / (1.0 / spec.theta).exp_m1()
}

/// Observables at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub var_x: Vec<f64>,
    /// NaN where `<n>` vanishes.
    pub mandel_q: Vec<f64>,
    pub wigner_center_re: Vec<f64>,
    pub wigner_center_im: Vec<f64>,
    pub wigner_width: Vec<f64>,
    /// Undamped variance, filled on request.
    pub var_x_free: Option<Vec<f64>>,
}

pub const SERIES_HEADER: [&str; 7] = [
    "t",
    "n_mean",
    "var_x",
    "mandel_q",
    "wigner_center_re",
    "wigner_center_im",
    "wigner_width",
];

impl ObservableSeries {
    pub fn compute(grid: &CoefficientGrid, m: &InitialStateMoments, free_reference: bool) -> Result<Self> {
        m.validate()?;
        let n = grid.len();
        let mut out = Self {
            t: grid.t.clone(),
            n_mean: Vec::with_capacity(n),
            var_x: Vec::with_capacity(n),
            mandel_q: Vec::with_capacity(n),
            wigner_center_re: Vec::with_capacity(n),
            wigner_center_im: Vec::with_capacity(n),
            wigner_width: Vec::with_capacity(n),
            var_x_free: free_reference.then(|| grid.t.iter().map(|&t| free_position_variance(m, t)).collect()),
        };
        for &t in &grid.t {
            out.n_mean.push(heating_at(grid, m.n0, t)?);
            out.var_x.push(position_variance_at(grid, m, t)?);
            out.mandel_q.push(match mandel_q_at(grid, m.n0, m.q0, t) {
                Ok(q) => q,
                Err(Error::DegenerateState(_)) if t == 0.0 => m.q0,
                Err(Error::DegenerateState(_)) => f64::NAN,
                Err(e) => return Err(e),
            });
            let w = wigner_coherent(grid, m.center, t)?;
            out.wigner_center_re.push(w.center.re);
            out.wigner_center_im.push(w.center.im);
            out.wigner_width.push(w.width);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut headers: Vec<&str> = SERIES_HEADER.to_vec();
        let mut cols: Vec<&[f64]> = vec![
            &self.t,
            &self.n_mean,
            &self.var_x,
            &self.mandel_q,
            &self.wigner_center_re,
            &self.wigner_center_im,
            &self.wigner_width,
        ];
        if let Some(f) = &self.var_x_free {
            headers.push("var_x_free");
            cols.push(f);
        }
        io::write_columns(w, &headers, &cols)
    }
}
