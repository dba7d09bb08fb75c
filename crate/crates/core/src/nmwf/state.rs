use num_complex::Complex64;

use crate::{Error, Result};

/// Initial pure state of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Fock(u32),
    Coherent(Complex64),
}

/// Stochastic pair `(phi, psi)` in a truncated Fock basis, kept at
/// `|phi|^2 + |psi|^2 = 2`.
///
/// `log_weight` carries the factor by which the linear (unnormalized) process
/// differs from the renormalized one. It stays zero while both decay
/// coefficients are positive and grows where one of them is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledState {
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub log_weight: f64,
}

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalized amplitudes of the initial state.
pub fn init_state(initial: InitialCondition, n_max: usize) -> Result<DoubledState> {
    let mut amp = vec![ZERO; n_max + 1];
    match initial {
        InitialCondition::Fock(n) => {
            let n = n as usize;
            if n + 4 > n_max {
                return Err(Error::CutoffTooSmall(format!(
                    "Fock({n}) needs n_max >= {} (got {n_max})",
                    n + 4
                )));
            }
            amp[n] = Complex64::new(1.0, 0.0);
        }
        InitialCondition::Coherent(a) => {
            let m = a.norm();
            if m * m + 6.0 * m > n_max as f64 {
                return Err(Error::CutoffTooSmall(format!(
                    "coherent |alpha0| = {m} needs n_max >= {:.0} (got {n_max})",
                    (m * m + 6.0 * m).ceil()
                )));
            }
            // c_n = e^{-|a|^2/2} a^n / sqrt(n!)
            let mut c = Complex64::new((-0.5 * m * m).exp(), 0.0);
            amp[0] = c;
            for (n, slot) in amp.iter_mut().enumerate().skip(1) {
                c = c * a / (n as f64).sqrt();
                *slot = c;
            }
            let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut amp {
                *z /= norm;
            }
        }
    }
    Ok(DoubledState {
        phi: amp.clone(),
        psi: amp,
        t: 0.0,
        log_weight: 0.0,
    })
}

impl DoubledState {
    pub fn n_max(&self) -> usize {
        self.phi.len() - 1
    }

    /// `|phi|^2 + |psi|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.phi.iter().chain(&self.psi).map(|z| z.norm_sqr()).sum()
    }

    /// Per-level `|phi_n|^2 + |psi_n|^2`.
    pub fn level_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.phi.iter().zip(&self.psi).map(|(a, b)| a.norm_sqr() + b.norm_sqr())
    }

    /// Lowest and highest occupied levels.
    pub fn occupied(&self) -> (usize, usize) {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for (n, w) in self.level_weights().enumerate() {
            if w > 0.0 {
                lo = lo.min(n);
                hi = n;
            }
        }
        (lo.min(hi), hi)
    }

    /// Rescales both vectors so that `|phi|^2 + |psi|^2 = 2`.
    pub fn renormalize(&mut self) -> Result<()> {
        let s = self.norm_sqr();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NullJump);
        }
        let f = (2.0 / s).sqrt();
        for z in self.phi.iter_mut().chain(self.psi.iter_mut()) {
            *z *= f;
        }
        Ok(())
    }

    /// `<psi| n |phi>` for the normalized pair.
    pub fn n_element(&self) -> Complex64 {
        self.psi
            .iter()
            .zip(&self.phi)
            .enumerate()
            .map(|(n, (b, a))| b.conj() * a * n as f64)
            .sum()
    }

    /// `sigma` with `phi = sigma psi` if the pair is aligned to `tol`.
    pub fn alignment(&self, tol: f64) -> Option<f64> {
        for sigma in [1.0, -1.0] {
            let dev: f64 = self
                .phi
                .iter()
                .zip(&self.psi)
                .map(|(a, b)| (a - b * sigma).norm_sqr())
                .sum();
            if dev.sqrt() <= tol {
                return Some(sigma);
            }
        }
        None
    }

    /// Population of the two highest levels relative to the total.
    pub fn top_population(&self) -> f64 {
        let n = self.n_max();
        let w: Vec<f64> = self.level_weights().collect();
        (w[n] + w[n - 1]) / self.norm_sqr()
    }

    pub(crate) fn check_truncation(&self, eps: f64) -> Result<()> {
        let p = self.top_population();
        if p >= eps {
            return Err(Error::TruncationBreach {
                t: self.t,
                population: p,
                eps,
            });
        }
        Ok(())
    }
}

/// Jump rates `(P1, P2)` for the scaled coefficients
/// `c_minus = beta (Delta - gamma)` and `c_plus = beta (Delta + gamma)`.
pub fn rates(state: &DoubledState, c_minus: f64, c_plus: f64) -> (f64, f64) {
    let mut up = 0.0;
    let mut down = 0.0;
    let mut total = 0.0;
    for (n, w) in state.level_weights().enumerate() {
        up += (n + 1) as f64 * w;
        down += n as f64 * w;
        total += w;
    }
    (c_minus.abs() * up / total, c_plus.abs() * down / total)
}

/// Jump channel: 1 raises (`a^dag`), 2 lowers (`a`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Channel {
    Raise,
    Lower,
}

/// Applies a jump; the coefficient sign goes onto `phi` only.
pub fn apply_jump(
    state: &mut DoubledState,
    channel: Channel,
    c_minus: f64,
    c_plus: f64,
    eps_trunc: f64,
) -> Result<()> {
    let n_max = state.n_max();
    let apply = |v: &mut Vec<Complex64>, sign: f64| {
        let mut out = vec![ZERO; n_max + 1];
        match channel {
            Channel::Raise => {
                for n in 0..n_max {
                    out[n + 1] = v[n] * ((n + 1) as f64).sqrt() * sign;
                }
            }
            Channel::Lower => {
                for n in 1..=n_max {
                    out[n - 1] = v[n] * (n as f64).sqrt() * sign;
                }
            }
        }
        *v = out;
    };
    let c = match channel {
        Channel::Raise => c_minus,
        Channel::Lower => c_plus,
    };
    let sign = if c < 0.0 { -1.0 } else { 1.0 };
    apply(&mut state.phi, sign);
    apply(&mut state.psi, 1.0);
    if state.norm_sqr() == 0.0 {
        return Err(Error::NullJump);
    }
    state.renormalize()?;
    state.check_truncation(eps_trunc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn fock_initial_states() {
        let s = init_state(InitialCondition::Fock(0), 10).unwrap();
        assert_eq!(s.phi[0], c(1.0));
        assert!(s.phi[1..].iter().all(|z| *z == ZERO));
        assert_eq!(s.norm_sqr(), 2.0);
        let f = init_state(InitialCondition::Fock(3), 10).unwrap();
        assert_eq!(f.phi[3], c(1.0));
        assert!(matches!(
            init_state(InitialCondition::Fock(7), 10),
            Err(Error::CutoffTooSmall(_))
        ));
    }

    #[test]
    fn coherent_initial_state() {
        let s = init_state(InitialCondition::Coherent(c(1.0)), 20).unwrap();
        let mut fact = 1.0;
        for n in 0..6 {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = (-0.5f64).exp() / fact.sqrt();
            assert!((s.phi[n].re - expect).abs() < 1e-12);
        }
        // Poisson tail beyond 20 is far below 1e-12
        assert!((s.norm_sqr() - 2.0).abs() < 1e-14);
        assert!(matches!(
            init_state(InitialCondition::Coherent(c(3.0)), 20),
            Err(Error::CutoffTooSmall(_))
        ));
    }

    #[test]
    fn rate_examples() {
        let g = init_state(InitialCondition::Fock(0), 10).unwrap();
        assert_eq!(rates(&g, -0.3, 0.5), (0.3, 0.0));
        let f = init_state(InitialCondition::Fock(3), 10).unwrap();
        let (p1, p2) = rates(&f, 0.2, -0.1);
        assert!((p1 - 0.8).abs() < 1e-15 && (p2 - 0.3).abs() < 1e-15);
        let coh = init_state(InitialCondition::Coherent(c(1.0)), 30).unwrap();
        let (p1, p2) = rates(&coh, 1.0, 1.0);
        assert!((p1 - 2.0).abs() < 1e-12 && (p2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jumps_on_the_ground_state() {
        let mut s = init_state(InitialCondition::Fock(0), 10).unwrap();
        apply_jump(&mut s, Channel::Raise, 0.2, 0.3, 1e-8).unwrap();
        assert_eq!(s.phi[1], c(1.0));
        assert_eq!(s.psi[1], c(1.0));
        assert_eq!(s.alignment(1e-12), Some(1.0));

        let mut n = init_state(InitialCondition::Fock(0), 10).unwrap();
        apply_jump(&mut n, Channel::Raise, -0.2, 0.3, 1e-8).unwrap();
        assert_eq!(n.phi[1], c(-1.0));
        assert_eq!(n.psi[1], c(1.0));
        assert_eq!(n.alignment(1e-12), Some(-1.0));
        assert_eq!(n.n_element(), c(-1.0));

        let mut v = init_state(InitialCondition::Fock(0), 10).unwrap();
        assert!(matches!(
            apply_jump(&mut v, Channel::Lower, 0.1, 0.1, 1e-8),
            Err(Error::NullJump)
        ));
    }

    #[test]
    fn lowering_a_fock_state() {
        let mut s = init_state(InitialCondition::Fock(3), 10).unwrap();
        apply_jump(&mut s, Channel::Lower, 0.1, -0.4, 1e-8).unwrap();
        assert_eq!(s.phi[2], c(-1.0));
        assert_eq!(s.psi[2], c(1.0));
        assert!((s.norm_sqr() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_breach_is_reported() {
        let mut s = init_state(InitialCondition::Fock(6), 10).unwrap();
        apply_jump(&mut s, Channel::Raise, 1.0, 1.0, 1e-8).unwrap();
        apply_jump(&mut s, Channel::Raise, 1.0, 1.0, 1e-8).unwrap();
        assert!(matches!(
            apply_jump(&mut s, Channel::Raise, 1.0, 1.0, 1e-8),
            Err(Error::TruncationBreach { .. })
        ));
    }
}
