//! Power-series evaluation of the two Gauss hypergeometric functions
//!
//! ```text
//! fbar(x, z) = 2F1(x, 1; 1 + x; z)    = sum_k x z^k / (x + k)
//! gbar(x, z) = 2F1(2, 1 + x; 2 + x; z) = sum_k (k + 1)(1 + x) z^k / (1 + x + k)
//! ```
//!
//! for complex `x` and real `0 <= z < 1`. Both series are summed directly;
//! the argument never leaves the unit interval in this crate, so no
//! continuation is needed. Convergence slows as `z -> 1`, and callers are
//! expected to switch to another evaluation route well before that.

use num_complex::Complex64;

use crate::{Error, Result};

/// Truncation controls for the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Stop once the tail bound drops below `rel_tol * |partial sum|`.
    pub rel_tol: f64,
    /// Hard budget on the number of terms.
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 1_000_000,
        }
    }
}

/// Series value together with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Upper estimate of the omitted tail.
    pub error_bound: f64,
    pub terms: usize,
}

const POLE_TOL: f64 = 1e-12;

fn check_args(x: Complex64, z: f64) -> Result<()> {
    if !x.re.is_finite() || !x.im.is_finite() {
        return Err(Error::DomainError(format!("non-finite parameter {x}")));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::DomainError(format!("z = {z} not in [0, 1)")));
    }
    Ok(())
}

/// Rejects `shift + x + k = 0` for some integer `k >= 0`.
fn check_pole(x: Complex64, shift: f64) -> Result<()> {
    let y = x + shift;
    let scale = x.norm().max(1.0);
    if y.im.abs() <= POLE_TOL * scale && y.re <= 0.5 {
        let nearest = y.re.round();
        if nearest <= 0.0 && (y.re - nearest).abs() <= POLE_TOL * scale {
            return Err(Error::PoleAtNonpositiveInteger(format!("{x}")));
        }
    }
    Ok(())
}

/// Sums `sum_k term(k)` where `|term(k+1)/term(k)| <= ratio_bound(k)` for all
/// later terms once `ratio_bound(k) < 1`.
fn sum_series(
    cfg: &SeriesConfig,
    mut term: impl FnMut(usize) -> Complex64,
    ratio_bound: impl Fn(usize) -> f64,
) -> Result<SeriesValue> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut next = term(0);
    for k in 0..cfg.max_terms {
        // Kahan-compensated accumulation
        let y = next - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;

        next = term(k + 1);
        let rho = ratio_bound(k + 1);
        if rho < 1.0 {
            let tail = next.norm() / (1.0 - rho);
            if tail <= cfg.rel_tol * sum.norm() || next.norm() == 0.0 {
                return Ok(SeriesValue {
                    value: sum,
                    error_bound: tail,
                    terms: k + 1,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        max_terms: cfg.max_terms,
    })
}

/// `2F1(x, 1; 1 + x; z)` with default truncation.
pub fn fbar(x: Complex64, z: f64) -> Result<Complex64> {
    fbar_with(x, z, &SeriesConfig::default()).map(|v| v.value)
}

pub fn fbar_with(x: Complex64, z: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_args(x, z)?;
    check_pole(x, 0.0)?;
    // term_k = x z^k / (x + k), the first one is exactly 1
    let mut zk = 1.0;
    let term = |k: usize| {
        if k == 0 {
            return Complex64::new(1.0, 0.0);
        }
        zk *= z;
        x * zk / (x + k as f64)
    };
    // |(x+k)/(x+k+1)| <= 1 once Re x + k >= -1/2
    let ratio = |k: usize| {
        if x.re + k as f64 >= -0.5 {
            z
        } else {
            f64::INFINITY
        }
    };
    sum_series(cfg, term, ratio)
}

/// `2F1(2, 1 + x; 2 + x; z)` with default truncation.
pub fn gbar(x: Complex64, z: f64) -> Result<Complex64> {
    gbar_with(x, z, &SeriesConfig::default()).map(|v| v.value)
}

pub fn gbar_with(x: Complex64, z: f64, cfg: &SeriesConfig) -> Result<SeriesValue> {
    check_args(x, z)?;
    check_pole(x, 1.0)?;
    let a = Complex64::new(1.0, 0.0) + x;
    let mut zk = 1.0;
    let term = |k: usize| {
        if k > 0 {
            zk *= z;
        }
        a * ((k + 1) as f64 * zk) / (a + k as f64)
    };
    // ratio = z (k+2)/(k+1) |1+x+k| / |2+x+k|
    let ratio = |k: usize| {
        let kf = k as f64;
        if a.re + kf >= -0.5 {
            z * (kf + 2.0) / (kf + 1.0)
        } else {
            f64::INFINITY
        }
    };
    sum_series(cfg, term, ratio)
}
