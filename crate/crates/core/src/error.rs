use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series parameter {0} is zero or a negative integer")]
    PoleAtNonpositiveInteger(String),
    #[error("series did not converge within {max_terms} terms")]
    NoConvergence { max_terms: usize },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("cutoff ratio r_c = {rc} is resonant with a Matsubara frequency")]
    ResonantCutoff { rc: f64 },
    #[error("quadrature did not reach tolerance (error estimate {error:e} after {intervals} subintervals)")]
    QuadratureFailure { error: f64, intervals: usize },
    #[error("time {t} outside the coefficient grid [{start}, {end}]")]
    OutOfGrid { t: f64, start: f64, end: f64 },
    #[error("mean occupation {0:e} too small for the Mandel parameter")]
    DegenerateState(f64),
    #[error("Fock cutoff too small: {0}")]
    CutoffTooSmall(String),
    #[error("population {population:e} in the top Fock levels exceeds {eps:e} at t = {t}")]
    TruncationBreach { t: f64, population: f64, eps: f64 },
    #[error("jump operator annihilates the state")]
    NullJump,
    #[error("bisection bracket invalid: {0}")]
    BracketFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Parameter-validation failures, as opposed to numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DomainError(_)
                | Error::CutoffTooSmall(_)
                | Error::OutOfGrid { .. }
        )
    }
}
