use std::io::Write;

use rayon::prelude::*;

use super::closed_form::{delta_closed_at, gamma_at, is_near_resonance, RESONANCE_GUARD, Z_SWITCH};
use super::kernels::quadrature_columns;
use super::ReservoirSpec;
use crate::quad::{cumulative, interval_integral_with};
use crate::{io, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Also fill `pi_coef` and `rshift` by quadrature (otherwise NaN).
    pub with_pi_r: bool,
    /// Relative tolerance of every quadrature performed.
    pub quad_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            with_pi_r: false,
            quad_tol: 1e-10,
        }
    }
}

/// Coefficients and their running integrals on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGrid {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub pi_coef: Vec<f64>,
    pub rshift: Vec<f64>,
    /// `Gamma(t) = 2 int_0^t gamma`.
    pub big_gamma: Vec<f64>,
    /// `Delta_Gamma(t) = e^{-Gamma(t)} int_0^t e^{Gamma} Delta`.
    pub delta_big_gamma: Vec<f64>,
    /// `int_0^t (Delta + gamma)`.
    pub i_plus: Vec<f64>,
    /// `int_0^t (Delta - gamma)`.
    pub i_minus: Vec<f64>,
}

/// Interpolated grid values at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub delta_big_gamma: f64,
    pub i_plus: f64,
    pub i_minus: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "delta",
    "gamma",
    "pi",
    "rshift",
    "big_gamma",
    "delta_big_gamma",
    "i_plus",
    "i_minus",
];

/// `n` equally spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "uniform grid needs n >= 2 and t_max > 0 (got n = {n}, t_max = {t_max})"
        )));
    }
    let h = t_max / (n - 1) as f64;
    let mut t: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    t[n - 1] = t_max;
    Ok(t)
}

/// `0` followed by `n - 1` geometrically spaced points on `[t_min, t_max]`.
pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 3 || !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "log grid needs n >= 3 and 0 < t_min < t_max (got {n}, {t_min}, {t_max})"
        )));
    }
    let ratio = (t_max / t_min).ln() / (n - 2) as f64;
    let mut t = vec![0.0];
    t.extend((0..n - 1).map(|i| t_min * (ratio * i as f64).exp()));
    t[n - 1] = t_max;
    Ok(t)
}

fn validate_times(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Err(Error::InvalidParameter("time grid needs at least 2 points".into()));
    }
    if t[0] != 0.0 {
        return Err(Error::InvalidParameter(format!("time grid must start at 0, got {}", t[0])));
    }
    for w in t.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time grid must be strictly ascending and finite near {}",
                w[0]
            )));
        }
    }
    Ok(())
}

/// Evaluates the coefficients on `t` and integrates them.
pub fn build_grid(spec: &ReservoirSpec, t: &[f64], opts: &GridOptions) -> Result<CoefficientGrid> {
    validate_times(t)?;
    let max_step = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let advised = (1.0 / spec.r).min(1.0) / 20.0;
    if max_step > advised * (1.0 + 1e-9) {
        log::warn!("grid step {max_step:.3e} exceeds the advised {advised:.3e}; integrals may be inaccurate");
    }
    let n = t.len();
    let gamma: Vec<f64> = t.iter().map(|&s| gamma_at(spec, s)).collect();

    let resonant = is_near_resonance(spec, RESONANCE_GUARD);
    if resonant {
        log::warn!(
            "rc = {} is close to an integer; using quadrature for Delta",
            spec.rc()
        );
    }
    let nu1 = spec.nu1();
    let quad_upto = if resonant || spec.alpha == 0.0 {
        n
    } else {
        t.iter().take_while(|&&s| s == 0.0 || (-nu1 * s).exp() > Z_SWITCH).count()
    };
    let cols_upto = if opts.with_pi_r { n } else { quad_upto };
    let quad = quadrature_columns(spec, t, cols_upto, opts.with_pi_r, opts.quad_tol)?;

    let closed: Vec<f64> = (quad_upto..n)
        .into_par_iter()
        .map(|k| delta_closed_at(spec, t[k]))
        .collect::<Result<_>>()?;
    let mut delta = quad.delta[..quad_upto].to_vec();
    delta.extend(closed);
    delta[0] = 0.0;

    let (pi_coef, rshift) = if opts.with_pi_r {
        (quad.pi_coef, quad.rshift)
    } else {
        (vec![f64::NAN; n], vec![f64::NAN; n])
    };
    let mut g = CoefficientGrid::from_rates(t.to_vec(), delta, gamma)?;
    g.pi_coef = pi_coef;
    g.rshift = rshift;
    Ok(g)
}

impl CoefficientGrid {
    /// Builds the running integrals from sampled `Delta` and `gamma`.
    /// `pi_coef` and `rshift` are set to NaN.
    pub fn from_rates(t: Vec<f64>, delta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        validate_times(&t)?;
        let n = t.len();
        if delta.len() != n || gamma.len() != n {
            return Err(Error::InvalidParameter("column lengths differ from the time grid".into()));
        }
        let two_gamma: Vec<f64> = gamma.iter().map(|g| 2.0 * g).collect();
        let big_gamma = cumulative(&t, &two_gamma);
        let plus: Vec<f64> = delta.iter().zip(&gamma).map(|(d, g)| d + g).collect();
        let minus: Vec<f64> = delta.iter().zip(&gamma).map(|(d, g)| d - g).collect();
        let i_plus = cumulative(&t, &plus);
        let i_minus = cumulative(&t, &minus);

        // D_{k+1} = e^{-(G_{k+1}-G_k)} D_k + int_{t_k}^{t_{k+1}} e^{G(s)-G_{k+1}} Delta(s) ds
        let mut dg = vec![0.0; n];
        for k in 0..n - 1 {
            let g1 = big_gamma[k + 1];
            let inc = interval_integral_with(&t, |j| (big_gamma[j] - g1).exp() * delta[j], k);
            dg[k + 1] = (big_gamma[k] - g1).exp() * dg[k] + inc;
        }
        Ok(Self {
            t,
            delta,
            gamma,
            pi_coef: vec![f64::NAN; n],
            rshift: vec![f64::NAN; n],
            big_gamma,
            delta_big_gamma: dg,
            i_plus,
            i_minus,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("grid has at least two points")
    }

    /// Interval index and linear weight for `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let start = self.t[0];
        let end = self.t_end();
        let slack = 1e-12 * (end - start).max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfGrid { t, start, end });
        }
        let t = t.clamp(start, end);
        let k = self.t.partition_point(|&s| s <= t).saturating_sub(1).min(self.len() - 2);
        let w = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        Ok((k, w))
    }

    fn lerp(col: &[f64], k: usize, w: f64) -> f64 {
        if w == 0.0 {
            col[k]
        } else {
            col[k] + w * (col[k + 1] - col[k])
        }
    }

    /// Linear interpolation of every column at `t`.
    pub fn sample(&self, t: f64) -> Result<GridSample> {
        let (k, w) = self.locate(t)?;
        Ok(GridSample {
            delta: Self::lerp(&self.delta, k, w),
            gamma: Self::lerp(&self.gamma, k, w),
            big_gamma: Self::lerp(&self.big_gamma, k, w),
            delta_big_gamma: Self::lerp(&self.delta_big_gamma, k, w),
            i_plus: Self::lerp(&self.i_plus, k, w),
            i_minus: Self::lerp(&self.i_minus, k, w),
        })
    }

    pub fn big_gamma_at(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.big_gamma)
    }

    pub fn delta_big_gamma_at(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.delta_big_gamma)
    }

    pub fn i_minus_at(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.i_minus)
    }

    pub fn i_plus_at(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.i_plus)
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// CSV with the columns of [`CSV_HEADER`].
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        io::write_columns(
            w,
            &CSV_HEADER,
            &[
                &self.t,
                &self.delta,
                &self.gamma,
                &self.pi_coef,
                &self.rshift,
                &self.big_gamma,
                &self.delta_big_gamma,
                &self.i_plus,
                &self.i_minus,
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{delta_high_t_at, kernels::delta_quad_at};

    fn spec(a: f64, r: f64, th: f64) -> ReservoirSpec {
        ReservoirSpec::new(a, r, th).unwrap()
    }

    #[test]
    fn grid_helpers() {
        let u = uniform_grid(2.0, 5).unwrap();
        assert_eq!(u, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let l = log_grid(1e-3, 10.0, 6).unwrap();
        assert_eq!(l[0], 0.0);
        assert!((l[1] - 1e-3).abs() < 1e-18 && l[5] == 10.0);
        assert!((l[3] / l[2] - 10.0).abs() < 1e-9);
        assert!(uniform_grid(1.0, 1).is_err());
        assert!(log_grid(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn start_values_are_zero() {
        let g = build_grid(&spec(0.1, 1.0, 1.0), &uniform_grid(5.0, 201).unwrap(), &GridOptions::default())
            .unwrap();
        assert_eq!(g.delta[0], 0.0);
        assert_eq!(g.gamma[0], 0.0);
        assert_eq!(g.big_gamma[0], 0.0);
        assert_eq!(g.delta_big_gamma[0], 0.0);
        assert_eq!(g.i_plus[0], 0.0);
        assert_eq!(g.i_minus[0], 0.0);
        assert!(g.pi_coef.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn zero_coupling_grid_is_identically_zero() {
        let g = build_grid(&spec(0.0, 1.0, 1.0), &uniform_grid(5.0, 51).unwrap(), &GridOptions::default())
            .unwrap();
        assert!(g.delta.iter().chain(&g.big_gamma).chain(&g.delta_big_gamma).all(|&v| v == 0.0));
    }

    #[test]
    fn delta_gamma_ode_identity() {
        let t = uniform_grid(40.0, 4000).unwrap();
        let g = build_grid(&spec(0.1, 0.1, 10.0), &t, &GridOptions::default()).unwrap();
        let scale = g.max_abs_delta();
        for k in 1..t.len() - 1 {
            let d = (g.delta_big_gamma[k + 1] - g.delta_big_gamma[k - 1]) / (t[k + 1] - t[k - 1]);
            let rhs = g.delta[k] - 2.0 * g.gamma[k] * g.delta_big_gamma[k];
            assert!((d - rhs).abs() <= 1e-4 * scale, "{k}");
        }
    }

    #[test]
    fn quadrature_fallback_near_origin_is_consistent() {
        let s = spec(0.1, 1.0, 1.0);
        let t = log_grid(1e-6, 1.0, 60).unwrap();
        let g = build_grid(&s, &t, &GridOptions::default()).unwrap();
        for (k, &tk) in t.iter().enumerate().skip(1) {
            let q = delta_quad_at(&s, tk, 2000, 1e-11).unwrap().value;
            assert!((g.delta[k] - q).abs() <= 1e-8 * g.max_abs_delta(), "{tk}");
        }
    }

    #[test]
    fn resonant_grid_uses_quadrature() {
        let s = ReservoirSpec::from_rc(0.1, 1.0, 1.0).unwrap();
        let t = uniform_grid(3.0, 31).unwrap();
        let g = build_grid(&s, &t, &GridOptions::default()).unwrap();
        let near = ReservoirSpec::from_rc(0.1, 1.0, 1.0 + 1e-2).unwrap();
        let h = build_grid(&near, &t, &GridOptions::default()).unwrap();
        for k in 1..t.len() {
            assert!(g.delta[k].is_finite());
            assert!((g.delta[k] - h.delta[k]).abs() < 0.05 * g.max_abs_delta());
        }
    }

    #[test]
    fn pi_and_rshift_columns() {
        let s = spec(0.1, 1.0, 1.0);
        let t = uniform_grid(30.0, 601).unwrap();
        let g = build_grid(&s, &t, &GridOptions { with_pi_r: true, quad_tol: 1e-10 }).unwrap();
        assert_eq!(g.pi_coef[0], 0.0);
        assert!((g.rshift[600] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn high_t_regime_diffusion_dominates() {
        let s = spec(0.1, 1.0, 10.0);
        let t = uniform_grid(50.0, 1001).unwrap();
        let g = build_grid(&s, &t, &GridOptions::default()).unwrap();
        let gmax = g.gamma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gmax / g.max_abs_delta() < 0.1);
        let _ = delta_high_t_at(&s, 1.0);
    }

    #[test]
    fn interpolation_and_bounds() {
        let g = CoefficientGrid::from_rates(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0], vec![0.0; 3]).unwrap();
        assert!((g.i_plus_at(1.5).unwrap() - 0.5 * (g.i_plus[1] + g.i_plus[2])).abs() < 1e-15);
        assert!(matches!(g.sample(2.5), Err(Error::OutOfGrid { .. })));
        assert!(g.sample(2.0).is_ok());
        assert!(CoefficientGrid::from_rates(vec![0.0, 1.0], vec![0.0], vec![0.0, 0.0]).is_err());
        assert!(CoefficientGrid::from_rates(vec![0.1, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = build_grid(&spec(0.1, 1.0, 1.0), &uniform_grid(1.0, 11).unwrap(), &GridOptions::default())
            .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 11);
        let last: Vec<f64> = rows[10].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(last[1], g.delta[10]);
        assert_eq!(last[6], g.delta_big_gamma[10]);
    }
}
