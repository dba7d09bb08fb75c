//! Numerical laboratory for the damped quantum harmonic oscillator coupled to
//! an Ohmic reservoir with a Lorentz-Drude cutoff.
//!
//! Units: hbar = k_B = 1 and the oscillator frequency is 1, so times are in
//! units of the oscillator period over 2 pi and rates in units of the
//! oscillator frequency.
//!
//! * [`specfun`]: the two Gauss hypergeometric series entering the closed
//!   form of the diffusion coefficient.
//! * [`coefficients`]: second-order master-equation coefficients and the
//!   cumulative quantities built from them.
//! * [`analytic`]: secular-approximation observables (heating, variance,
//!   Mandel Q, Wigner function, characteristic function).
//! * [`nmwf`]: stochastic unravelling in the doubled Hilbert space.
//! * [`border`]: Lindblad / non-Lindblad classification and border scans.
//! * [`cli`]: batch front end used by the `qbmlab` binary.

pub mod analytic;
pub mod border;
pub mod cli;
pub mod coefficients;
mod error;
pub mod io;
pub mod nmwf;
pub(crate) mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
