use num_complex::Complex64;

use super::state::DoubledState;
use crate::coefficients::CoefficientGrid;
use crate::{Error, Result};

/// Running integrals of a piecewise-linear coefficient: signed, absolute and
/// negative part.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Cum {
    s1: f64,
    s2: f64,
    a1: f64,
    a2: f64,
    n1: f64,
    n2: f64,
}

/// Integrals of the linear segment from `fa` to `fb` over length `h`.
fn segment(fa: f64, fb: f64, h: f64) -> (f64, f64, f64) {
    let signed = 0.5 * (fa + fb) * h;
    if fa >= 0.0 && fb >= 0.0 {
        return (signed, signed, 0.0);
    }
    if fa <= 0.0 && fb <= 0.0 {
        return (signed, -signed, -signed);
    }
    let x = fa / (fa - fb) * h;
    let left = 0.5 * fa.abs() * x;
    let right = 0.5 * fb.abs() * (h - x);
    let neg = if fa < 0.0 { left } else { right };
    (signed, left + right, neg)
}

/// Deterministic flow of the doubled state for `beta`-scaled coefficients
/// `c1 = beta (Delta - gamma)` and `c2 = beta (Delta + gamma)`, linearly
/// interpolated between grid nodes.
#[derive(Debug, Clone)]
pub struct Propagator {
    t: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    cum: Vec<Cum>,
    /// Trapezoid step for rate integrals of superposition states.
    pub max_step: f64,
    /// Bound on the population of the two highest Fock levels.
    pub eps_trunc: f64,
}

impl Propagator {
    pub fn new(grid: &CoefficientGrid, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be > 0")));
        }
        let c1: Vec<f64> = grid
            .delta
            .iter()
            .zip(&grid.gamma)
            .map(|(d, g)| beta * (d - g))
            .collect();
        let c2: Vec<f64> = grid
            .delta
            .iter()
            .zip(&grid.gamma)
            .map(|(d, g)| beta * (d + g))
            .collect();
        let mut cum = vec![Cum::default(); grid.len()];
        for k in 1..grid.len() {
            let h = grid.t[k] - grid.t[k - 1];
            let (s1, a1, n1) = segment(c1[k - 1], c1[k], h);
            let (s2, a2, n2) = segment(c2[k - 1], c2[k], h);
            let p = cum[k - 1];
            cum[k] = Cum {
                s1: p.s1 + s1,
                s2: p.s2 + s2,
                a1: p.a1 + a1,
                a2: p.a2 + a2,
                n1: p.n1 + n1,
                n2: p.n2 + n2,
            };
        }
        let span = grid.t_end() - grid.t[0];
        Ok(Self {
            t: grid.t.clone(),
            c1,
            c2,
            cum,
            max_step: span / 1000.0,
            eps_trunc: 1e-8,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("grid has at least two points")
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (end - start).max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfGrid { t, start, end });
        }
        let t = t.clamp(start, end);
        let k = self.t.partition_point(|&s| s <= t).saturating_sub(1).min(self.t.len() - 2);
        Ok((k, t))
    }

    /// Scaled coefficients `(c1, c2)` at `t`.
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64)> {
        let (k, t) = self.locate(t)?;
        Ok(self.coef_in(k, t))
    }

    fn coef_in(&self, k: usize, t: f64) -> (f64, f64) {
        let w = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        (
            self.c1[k] + w * (self.c1[k + 1] - self.c1[k]),
            self.c2[k] + w * (self.c2[k + 1] - self.c2[k]),
        )
    }

    fn cum_at(&self, t: f64) -> Result<Cum> {
        let (k, t) = self.locate(t)?;
        let (f1, f2) = self.coef_in(k, t);
        let h = t - self.t[k];
        let (s1, a1, n1) = segment(self.c1[k], f1, h);
        let (s2, a2, n2) = segment(self.c2[k], f2, h);
        let p = self.cum[k];
        Ok(Cum {
            s1: p.s1 + s1,
            s2: p.s2 + s2,
            a1: p.a1 + a1,
            a2: p.a2 + a2,
            n1: p.n1 + n1,
            n2: p.n2 + n2,
        })
    }
}

/// Populations along the drift started from a fixed state.
struct Flow {
    lo: usize,
    ln_w0: Vec<f64>,
    cum0: Cum,
    fock: bool,
}

impl Flow {
    fn new(state: &DoubledState, prop: &Propagator) -> Result<Self> {
        let (lo, hi) = state.occupied();
        let ln_w0 = state
            .level_weights()
            .skip(lo)
            .take(hi - lo + 1)
            .map(f64::ln)
            .collect();
        Ok(Self {
            lo,
            ln_w0,
            cum0: prop.cum_at(state.t)?,
            fock: lo == hi,
        })
    }

    /// `(sum p_n (n+1), sum p_n n)` at cumulative integrals `c`.
    fn moments(&self, c: &Cum) -> (f64, f64) {
        if self.fock {
            let n = self.lo as f64;
            return (n + 1.0, n);
        }
        let d1 = c.s1 - self.cum0.s1;
        let d2 = c.s2 - self.cum0.s2;
        let e: Vec<f64> = self
            .ln_w0
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let n = (self.lo + j) as f64;
                l - n * d2 - (n + 1.0) * d1
            })
            .collect();
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut down) = (0.0, 0.0);
        for (j, x) in e.iter().enumerate() {
            let p = (x - m).exp();
            z += p;
            down += p * (self.lo + j) as f64;
        }
        let down = down / z;
        (down + 1.0, down)
    }

    /// Total jump rate and log-weight density at `s`.
    fn densities(&self, prop: &Propagator, s: f64) -> Result<(f64, f64)> {
        let (c1, c2) = prop.coefficients(s)?;
        let (up, down) = self.moments(&prop.cum_at(s)?);
        let rate = c1.abs() * up + c2.abs() * down;
        let lw = 2.0 * ((-c1).max(0.0) * up + (-c2).max(0.0) * down);
        Ok((rate, lw))
    }

    fn substeps(prop: &Propagator, t0: f64, t1: f64) -> usize {
        (((t1 - t0) / prop.max_step).ceil() as usize).max(1)
    }
}

/// Propagates the pair to `t1` with the exact diagonal drift, renormalizes,
/// and accumulates the log-weight.
pub fn drift_propagate(state: &mut DoubledState, prop: &Propagator, t1: f64) -> Result<()> {
    let t0 = state.t;
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!(
            "drift target {t1} precedes state time {t0}"
        )));
    }
    if t1 == t0 {
        return Ok(());
    }
    let flow = Flow::new(state, prop)?;
    let c1 = prop.cum_at(t1)?;
    let d1 = c1.s1 - flow.cum0.s1;
    let d2 = c1.s2 - flow.cum0.s2;
    let dt = t1 - t0;

    if flow.fock {
        let n = flow.lo as f64;
        state.log_weight +=
            2.0 * ((n + 1.0) * (c1.n1 - flow.cum0.n1) + n * (c1.n2 - flow.cum0.n2));
    } else {
        let m = Flow::substeps(prop, t0, t1);
        let h = dt / m as f64;
        let mut acc = 0.0;
        let mut prev = flow.densities(prop, t0)?.1;
        for j in 1..=m {
            let s = if j == m { t1 } else { t0 + j as f64 * h };
            let cur = flow.densities(prop, s)?.1;
            acc += 0.5 * (prev + cur) * h;
            prev = cur;
        }
        state.log_weight += acc;
    }

    let (lo, hi) = state.occupied();
    let ln_scale = |n: f64| -0.5 * (n * d2 + (n + 1.0) * d1);
    let top = (lo..=hi)
        .map(|n| ln_scale(n as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    for n in lo..=hi {
        let nf = n as f64;
        let f = Complex64::from_polar((ln_scale(nf) - top).exp(), -nf * dt);
        state.phi[n] *= f;
        state.psi[n] *= f;
    }
    state.t = t1;
    state.renormalize()?;
    state.check_truncation(prop.eps_trunc)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Time of the next jump for the uniform draw `eta`, or `None` if the
/// accumulated rate stays below `-ln(1 - eta)` up to the end of the grid.
pub fn sample_jump_time(
    state: &DoubledState,
    prop: &Propagator,
    eta: f64,
) -> Result<Option<f64>> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta = {eta} outside [0, 1)")));
    }
    let t0 = state.t;
    let end = prop.t_end();
    let threshold = -(-eta).ln_1p();
    let flow = Flow::new(state, prop)?;
    if threshold == 0.0 {
        let rate = flow.densities(prop, t0)?.0;
        return Ok((rate > 0.0).then_some(t0));
    }

    if flow.fock {
        let n = flow.lo as f64;
        let base = (n + 1.0) * flow.cum0.a1 + n * flow.cum0.a2;
        let acc = |c: &Cum| (n + 1.0) * c.a1 + n * c.a2 - base;
        let first = prop.t.partition_point(|&s| s <= t0);
        let rel = prop.cum[first..].partition_point(|c| acc(c) < threshold);
        let k = first + rel;
        if k >= prop.t.len() {
            return Ok(None);
        }
        let lo = if k == first { t0 } else { prop.t[k - 1] };
        let t = bisect(lo, prop.t[k], |s| Ok(acc(&prop.cum_at(s)?) - threshold))?;
        return Ok(Some(t));
    }

    let m = Flow::substeps(prop, t0, end);
    let h = (end - t0) / m as f64;
    let mut acc = 0.0;
    let mut a = t0;
    let mut pa = flow.densities(prop, t0)?.0;
    for j in 1..=m {
        let b = if j == m { end } else { t0 + j as f64 * h };
        let pb = flow.densities(prop, b)?.0;
        let step = 0.5 * (pa + pb) * (b - a);
        if acc + step >= threshold {
            let base = acc;
            let t = bisect(a, b, |s| {
                let ps = flow.densities(prop, s)?.0;
                Ok(base + 0.5 * (pa + ps) * (s - a) - threshold)
            })?;
            return Ok(Some(t));
        }
        acc += step;
        a = b;
        pa = pb;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmwf::state::{init_state, InitialCondition};

    fn constant_grid(delta: f64, gamma: f64, t_max: f64, n: usize) -> CoefficientGrid {
        let t: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        CoefficientGrid::from_rates(t, vec![delta; n], vec![gamma; n]).unwrap()
    }

    #[test]
    fn segment_integrals() {
        assert_eq!(segment(1.0, 3.0, 2.0), (4.0, 4.0, 0.0));
        assert_eq!(segment(-1.0, -3.0, 2.0), (-4.0, 4.0, 4.0));
        let (s, a, n) = segment(-1.0, 1.0, 2.0);
        assert!(s.abs() < 1e-15 && (a - 1.0).abs() < 1e-15 && (n - 0.5).abs() < 1e-15);
        let (s, a, n) = segment(3.0, -1.0, 4.0);
        assert!((s - 4.0).abs() < 1e-15 && (a - 5.0).abs() < 1e-15 && (n - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_pure_phases() {
        let grid = constant_grid(0.0, 0.0, 10.0, 101);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let mut s = init_state(InitialCondition::Coherent(Complex64::new(1.0, 0.0)), 20).unwrap();
        let before = s.clone();
        drift_propagate(&mut s, &prop, 2.5).unwrap();
        for n in 0..=20 {
            let expect = before.phi[n] * Complex64::from_polar(1.0, -(n as f64) * 2.5);
            assert!((s.phi[n] - expect).norm() < 1e-14);
        }
        assert_eq!(s.log_weight, 0.0);
        assert_eq!(sample_jump_time(&s, &prop, 0.5).unwrap(), None);
    }

    #[test]
    fn ground_state_is_a_drift_fixed_point() {
        let grid = constant_grid(0.3, 0.1, 10.0, 11);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let mut s = init_state(InitialCondition::Fock(0), 10).unwrap();
        drift_propagate(&mut s, &prop, 7.3).unwrap();
        assert!((s.phi[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.log_weight, 0.0);
    }

    #[test]
    fn negative_coefficient_grows_the_weight() {
        // c1 = -0.2 over [0, 5]: log-weight 2 |c1| t for the ground state
        let grid = constant_grid(0.1, 0.3, 10.0, 11);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let mut s = init_state(InitialCondition::Fock(0), 10).unwrap();
        drift_propagate(&mut s, &prop, 5.0).unwrap();
        assert!((s.log_weight - 2.0).abs() < 1e-13);
    }

    /// RK4 on the linear drift equation of a two-level superposition.
    #[test]
    fn two_level_drift_matches_integrator() {
        let n = 201;
        let t: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
        let delta: Vec<f64> = t.iter().map(|s| 0.3 * (1.0 - (-s).exp())).collect();
        let gamma: Vec<f64> = t.iter().map(|s| 0.1 * s.sin()).collect();
        let grid = CoefficientGrid::from_rates(t, delta, gamma).unwrap();
        let prop = Propagator::new(&grid, 2.0).unwrap();

        let mut s = init_state(InitialCondition::Fock(0), 8).unwrap();
        let c0 = Complex64::new(0.6, 0.0);
        let c1 = Complex64::new(0.0, 0.8);
        s.phi[0] = c0;
        s.phi[1] = c1;
        s.psi = s.phi.clone();
        s.t = 0.3;
        drift_propagate(&mut s, &prop, 0.45).unwrap();

        let rhs = |tt: f64, y: [Complex64; 2]| {
            let (a, b) = prop.coefficients(tt).unwrap();
            let mut out = [Complex64::new(0.0, 0.0); 2];
            for (k, yk) in y.iter().enumerate() {
                let nf = k as f64;
                let rate = -0.5 * (nf * b + (nf + 1.0) * a);
                out[k] = *yk * Complex64::new(rate, -nf);
            }
            out
        };
        let mut y = [c0, c1];
        let steps = 20000;
        let h = 0.15 / steps as f64;
        let mut tt = 0.3;
        let axpy = |y: [Complex64; 2], k: [Complex64; 2], f: f64| [y[0] + k[0] * f, y[1] + k[1] * f];
        for _ in 0..steps {
            let k1 = rhs(tt, y);
            let k2 = rhs(tt + 0.5 * h, axpy(y, k1, 0.5 * h));
            let k3 = rhs(tt + 0.5 * h, axpy(y, k2, 0.5 * h));
            let k4 = rhs(tt + h, axpy(y, k3, h));
            for i in 0..2 {
                y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
            tt += h;
        }
        let norm = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
        for i in 0..2 {
            assert!((s.phi[i] - y[i] / norm).norm() < 1e-8, "level {i}");
        }
        assert!((s.norm_sqr() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jump_time_on_constant_rate() {
        // Fock(2): rate 3 c1 + 2 c2 = 3 * 0.2 + 2 * 0.4 = 1.4
        let grid = constant_grid(0.3, 0.1, 10.0, 11);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let s = init_state(InitialCondition::Fock(2), 10).unwrap();
        let eta = 0.6;
        let t = sample_jump_time(&s, &prop, eta).unwrap().unwrap();
        assert!((t - (-(1.0f64 - eta).ln() / 1.4)).abs() < 1e-12);
        assert_eq!(sample_jump_time(&s, &prop, 0.0).unwrap(), Some(0.0));
        assert_eq!(sample_jump_time(&s, &prop, 1.0 - 1e-12).unwrap(), None);
    }

    #[test]
    fn superposition_jump_time_uses_moving_populations() {
        let grid = constant_grid(0.3, 0.1, 20.0, 201);
        let mut prop = Propagator::new(&grid, 1.0).unwrap();
        prop.max_step = 0.001;
        let s = init_state(InitialCondition::Coherent(Complex64::new(1.0, 0.0)), 20).unwrap();
        let eta = 0.9;
        let t = sample_jump_time(&s, &prop, eta).unwrap().unwrap();
        // cross-check: integrate the rate with the exact drift on a fine mesh
        let mut acc = 0.0;
        let mut st = s.clone();
        let mut prev = {
            let (a, b) = crate::nmwf::state::rates(&st, 0.2, 0.4);
            a + b
        };
        let h = t / 4000.0;
        for j in 1..=4000 {
            drift_propagate(&mut st, &prop, j as f64 * h).unwrap();
            let (a, b) = crate::nmwf::state::rates(&st, 0.2, 0.4);
            acc += 0.5 * (prev + a + b) * h;
            prev = a + b;
        }
        assert!((acc + (1.0f64 - eta).ln()).abs() < 1e-6, "{acc}");
    }
}
