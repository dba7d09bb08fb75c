//! Lindblad-type vs non-Lindblad-type classification of reservoir parameters
//! and the border in the `(r, omega_c t)` plane.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::coefficients::{delta_at, gamma_at, ReservoirSpec};
use crate::io::fmt_num;
use crate::{Error, Result};

/// Values below `-SIGN_FLOOR * scale` count as negative; smaller excursions
/// are treated as rounding noise around zero.
const SIGN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Delta,
    DeltaMinusGamma,
    DeltaPlusGamma,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Self::Delta, Self::DeltaMinusGamma, Self::DeltaPlusGamma];

    pub fn name(self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::DeltaMinusGamma => "delta_minus_gamma",
            Self::DeltaPlusGamma => "delta_plus_gamma",
        }
    }

    fn combine(self, delta: f64, gamma: f64) -> f64 {
        match self {
            Self::Delta => delta,
            Self::DeltaMinusGamma => delta - gamma,
            Self::DeltaPlusGamma => delta + gamma,
        }
    }
}

/// Negative intervals of one coefficient combination on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SignProfile {
    pub quantity: Quantity,
    pub negative_intervals: Vec<(f64, f64)>,
    pub horizon: f64,
}

impl SignProfile {
    pub fn is_nonnegative(&self) -> bool {
        self.negative_intervals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Classification {
    LindbladType,
    NonLindbladType,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Self::LindbladType => "lindblad-type",
            Self::NonLindbladType => "non-lindblad-type",
        }
    }
}

/// `max(20/r, 40 pi)`: covers the cutoff transient and twenty oscillator
/// periods.
pub fn default_horizon(r: f64) -> f64 {
    (20.0 / r).max(40.0 * PI)
}

fn bisect_root(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let fa_neg = f(a)? < 0.0;
    while b - a > 1e-8 {
        let m = 0.5 * (a + b);
        if (f(m)? < 0.0) == fa_neg {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Sign profiles of `Delta`, `Delta - gamma` and `Delta + gamma`, bracketed on
/// `n_points` uniform samples and refined by bisection to `1e-8` in `t`.
pub fn sign_profiles(spec: &ReservoirSpec, horizon: f64, n_points: usize) -> Result<Vec<SignProfile>> {
    if !(horizon.is_finite() && horizon > 0.0) || n_points < 2 {
        return Err(Error::InvalidParameter(format!(
            "need horizon > 0 and n_points >= 2 (got {horizon}, {n_points})"
        )));
    }
    if n_points < 1000 {
        log::warn!("sign profile with {n_points} points may miss short negative intervals");
    }
    let t: Vec<f64> = (1..n_points).map(|i| horizon * i as f64 / (n_points - 1) as f64).collect();
    let dg: Vec<(f64, f64)> = t
        .par_iter()
        .map(|&s| Ok((delta_at(spec, s)?, gamma_at(spec, s))))
        .collect::<Result<_>>()?;
    let scale = dg.iter().map(|(d, g)| d.abs() + g.abs()).fold(0.0, f64::max);
    let floor = SIGN_FLOOR * scale;

    Quantity::ALL
        .iter()
        .map(|&q| {
            let eval = |s: f64| -> Result<f64> {
                Ok(q.combine(delta_at(spec, s)?, gamma_at(spec, s)) + floor)
            };
            let neg: Vec<bool> = dg.iter().map(|&(d, g)| q.combine(d, g) + floor < 0.0).collect();
            let mut intervals = Vec::new();
            let mut open: Option<f64> = if neg[0] { Some(0.0) } else { None };
            for i in 1..t.len() {
                if neg[i] != neg[i - 1] {
                    let x = bisect_root(t[i - 1], t[i], eval)?;
                    match open.take() {
                        Some(start) => intervals.push((start, x)),
                        None => open = Some(x),
                    }
                }
            }
            if let Some(start) = open {
                intervals.push((start, horizon));
            }
            Ok(SignProfile {
                quantity: q,
                negative_intervals: intervals,
                horizon,
            })
        })
        .collect()
}

/// Non-Lindblad-type iff `Delta - gamma` or `Delta + gamma` turns negative
/// before `horizon`.
pub fn classify(spec: &ReservoirSpec, horizon: f64) -> Result<Classification> {
    let n = ((horizon * spec.r.max(1.0) * 20.0).ceil() as usize).clamp(4000, 200_000);
    let profiles = sign_profiles(spec, horizon, n)?;
    let non = profiles
        .iter()
        .any(|p| p.quantity != Quantity::Delta && !p.is_nonnegative());
    Ok(if non {
        Classification::NonLindbladType
    } else {
        Classification::LindbladType
    })
}

/// High-temperature diffusion coefficient over `2 alpha^2 kT`, which depends
/// on `r` and `t` only.
pub fn delta_bar_high_t(r: f64, t: f64) -> f64 {
    let r2 = r * r;
    r2 / (1.0 + r2) * (1.0 - (-r * t).exp() * (t.cos() - t.sin() / r))
}

/// Minimum of [`delta_bar_high_t`] over `(0, horizon]` and its location.
pub fn min_delta_bar_high_t(r: f64, horizon: f64) -> (f64, f64) {
    let n = ((horizon / 0.01).ceil() as usize).max(100);
    let h = horizon / n as f64;
    let (mut best_t, mut best) = (h, delta_bar_high_t(r, h));
    for i in 2..=n {
        let s = i as f64 * h;
        let v = delta_bar_high_t(r, s);
        if v < best {
            best = v;
            best_t = s;
        }
    }
    // golden-section polish within one step either side
    let (mut a, mut b) = ((best_t - h).max(0.0), (best_t + h).min(horizon));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if delta_bar_high_t(r, c) < delta_bar_high_t(r, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let v = delta_bar_high_t(r, s);
    if v < best {
        (v, s)
    } else {
        (best, best_t)
    }
}

/// Largest `r` for which the high-temperature diffusion coefficient dips
/// below zero, by bisection to `tol_r`.
pub fn critical_r_high_t(horizon: Option<f64>, tol_r: f64) -> Result<f64> {
    if !(tol_r > 0.0) {
        return Err(Error::InvalidParameter(format!("tol_r = {tol_r} must be > 0")));
    }
    let negative = |r: f64| min_delta_bar_high_t(r, horizon.unwrap_or_else(|| default_horizon(r))).0 < 0.0;
    let (mut lo, mut hi) = (0.05, 2.0);
    if !negative(lo) || negative(hi) {
        return Err(Error::BracketFailure(format!(
            "no sign change of min Delta_bar between r = {lo} and r = {hi}"
        )));
    }
    while hi - lo > tol_r {
        let mid = 0.5 * (lo + hi);
        if negative(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Regime {
    /// Normalized high-temperature diffusion coefficient.
    HighT,
    /// `(Delta - gamma)/alpha^2` with `theta = r / rc_times_2pi` along the scan.
    General { rc_times_2pi: f64 },
}

/// Field over `r` (rows) and `omega_c t` (columns).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ContourGrid {
    pub regime: Regime,
    pub r: Vec<f64>,
    pub wct: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn field_value(regime: Regime, r: f64, wct: f64) -> Result<f64> {
    let t = wct / r;
    if t == 0.0 {
        return Ok(0.0);
    }
    match regime {
        Regime::HighT => Ok(delta_bar_high_t(r, t)),
        Regime::General { rc_times_2pi } => {
            let spec = ReservoirSpec::new(1.0, r, r / rc_times_2pi)?;
            Ok(delta_at(&spec, t)? - gamma_at(&spec, t))
        }
    }
}

pub fn contour_grid(regime: Regime, r: &[f64], wct: &[f64]) -> Result<ContourGrid> {
    if r.is_empty() || wct.is_empty() || r.iter().any(|&x| !(x > 0.0)) || wct.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "contour axes must be nonempty with r > 0 and omega_c t >= 0".into(),
        ));
    }
    if let Regime::General { rc_times_2pi } = regime {
        if !(rc_times_2pi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "2 pi rc = {rc_times_2pi} must be > 0"
            )));
        }
    }
    let values = r
        .par_iter()
        .map(|&ri| wct.iter().map(|&w| field_value(regime, ri, w)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourGrid {
        regime,
        r: r.to_vec(),
        wct: wct.to_vec(),
        values,
    })
}

impl ContourGrid {
    /// First zero crossing into negative values along each row, refined by
    /// bisection; `None` when the row stays nonnegative.
    pub fn border(&self) -> Result<Vec<(f64, Option<f64>)>> {
        self.r
            .iter()
            .zip(&self.values)
            .map(|(&r, row)| {
                let j = match row.iter().position(|&v| v < 0.0) {
                    Some(j) => j,
                    None => return Ok((r, None)),
                };
                if j == 0 {
                    return Ok((r, Some(self.wct[0])));
                }
                let x = bisect_root(self.wct[j - 1], self.wct[j], |w| field_value(self.regime, r, w))?;
                Ok((r, Some(x)))
            })
            .collect()
    }

    /// Matrix CSV: the header carries the `omega_c t` axis, the first column
    /// the `r` axis.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let head: Vec<String> = self.wct.iter().map(|&x| fmt_num(x)).collect();
        writeln!(w, "r\\wct,{}", head.join(","))?;
        for (r, row) in self.r.iter().zip(&self.values) {
            let vals: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
            writeln!(w, "{},{}", fmt_num(*r), vals.join(","))?;
        }
        w.flush()
    }
}

/// Border polyline CSV `(r, t_first_negative)`; rows without a crossing
/// carry `NaN`.
pub fn write_border_csv<W: Write>(w: W, border: &[(f64, Option<f64>)]) -> std::io::Result<()> {
    let r: Vec<f64> = border.iter().map(|b| b.0).collect();
    let t: Vec<f64> = border.iter().map(|b| b.1.unwrap_or(f64::NAN)).collect();
    crate::io::write_columns(w, &["r", "wct_first_negative"], &[&r, &t])
}

/// Profile CSV: one row per negative interval.
pub fn write_profiles_csv<W: Write>(w: W, profiles: &[SignProfile]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "quantity,t_start,t_end")?;
    for p in profiles {
        for (a, b) in &p.negative_intervals {
            writeln!(w, "{},{},{}", p.quantity.name(), fmt_num(*a), fmt_num(*b))?;
        }
    }
    w.flush()
}
