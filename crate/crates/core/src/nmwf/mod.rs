//! Non-Markovian wave-function Monte Carlo in the doubled Hilbert space.
//!
//! Trajectories alternate an exact diagonal drift with signed jumps. Where a
//! decay coefficient is negative, jumps use its absolute value and the
//! trajectory carries a weight that keeps the ensemble unbiased.

mod propagator;
mod state;

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

pub use propagator::{drift_propagate, sample_jump_time, Propagator};
pub use state::{apply_jump, init_state, rates, Channel, DoubledState, InitialCondition};

use crate::coefficients::CoefficientGrid;
use crate::{Error, Result};

/// Trajectories per deterministic reduction block.
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub initial: InitialCondition,
    pub n_max: usize,
    pub beta: f64,
    /// Output sample times, ascending.
    pub t_grid: Vec<f64>,
    pub eps_trunc: f64,
    pub seed: u64,
    pub n_traj: usize,
    /// Trapezoid step for superposition states.
    pub max_step: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl TrajectoryConfig {
    pub fn new(initial: InitialCondition, t_grid: Vec<f64>) -> Self {
        Self {
            initial,
            n_max: 30,
            beta: 1.0,
            t_grid,
            eps_trunc: 1e-8,
            seed: 0,
            n_traj: 1000,
            max_step: 0.025,
            workers: None,
        }
    }

    /// Recommended trapezoid step `min(1/r, 1)/40` for cutoff ratio `r`.
    pub fn max_step_for(r: f64) -> f64 {
        (1.0 / r).min(1.0) / 40.0
    }

    fn validate(&self, grid: &CoefficientGrid) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("empty sample grid".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sample times must increase".into()));
        }
        grid.locate(self.t_grid[0])?;
        grid.locate(*self.t_grid.last().expect("nonempty"))?;
        if !(self.eps_trunc > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidParameter(
                "eps_trunc and max_step must be > 0".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// One trajectory: `<psi|n|phi>`, weight and jump count at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub n_element: Vec<Complex64>,
    pub weight: Vec<f64>,
    pub jumps_before: Vec<u32>,
    pub jumps: Vec<(f64, Channel)>,
}

impl TrajectoryRecord {
    /// Weighted real part, the per-trajectory estimator.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.n_element.iter().zip(&self.weight).map(|(z, w)| w * z.re)
    }
}

/// Stream `index` of the generator keyed by `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn record(state: &DoubledState, out: &mut TrajectoryRecord, jumps: u32) -> Result<()> {
    if state.alignment(1e-9).is_none() {
        return Err(Error::InvalidParameter(format!(
            "trajectory pair lost alignment at t = {}",
            state.t
        )));
    }
    out.n_element.push(state.n_element());
    out.weight.push(state.log_weight.exp());
    out.jumps_before.push(jumps);
    Ok(())
}

pub fn run_trajectory<R: Rng>(
    config: &TrajectoryConfig,
    prop: &Propagator,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    let mut state = init_state(config.initial, config.n_max)?;
    state.t = prop.t_start();
    let mut out = TrajectoryRecord {
        n_element: Vec::with_capacity(config.t_grid.len()),
        weight: Vec::with_capacity(config.t_grid.len()),
        jumps_before: Vec::with_capacity(config.t_grid.len()),
        jumps: Vec::new(),
    };
    let horizon = *config.t_grid.last().expect("validated");
    let mut samples = config.t_grid.iter().copied().peekable();
    loop {
        let eta: f64 = rng.random();
        let next = sample_jump_time(&state, prop, eta)?.filter(|&t| t <= horizon);
        let stop = next.unwrap_or(horizon);
        while let Some(&s) = samples.peek() {
            if s > stop || (next.is_some() && s == stop) {
                break;
            }
            let target = s.max(state.t);
            drift_propagate(&mut state, prop, target)?;
            let jumps = out.jumps.len() as u32;
            record(&state, &mut out, jumps)?;
            samples.next();
        }
        let Some(tj) = next else { break };
        drift_propagate(&mut state, prop, tj)?;
        let (c1, c2) = prop.coefficients(tj)?;
        let (p1, p2) = rates(&state, c1, c2);
        let u: f64 = rng.random();
        let channel = if p1 + p2 > 0.0 {
            if u * (p1 + p2) < p1 {
                Channel::Raise
            } else {
                Channel::Lower
            }
        } else if p1 >= p2 {
            Channel::Raise
        } else {
            Channel::Lower
        };
        apply_jump(&mut state, channel, c1, c2, prop.eps_trunc)?;
        out.jumps.push((tj, channel));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EnsembleEstimate {
    pub t: Vec<f64>,
    /// Heating estimate `n0 + (raw - n0)/beta`.
    pub n_mean: Vec<f64>,
    pub n_stderr: Vec<f64>,
    pub raw_mean: Vec<f64>,
    pub raw_stderr: Vec<f64>,
    /// Mean number of jumps before each sample time.
    pub jumps_mean: Vec<f64>,
    /// `jump_histogram[k]` trajectories had exactly `k` jumps.
    pub jump_histogram: Vec<u64>,
    pub multi_jump_fraction: f64,
    pub n0: f64,
    pub beta: f64,
    pub n_traj: usize,
    /// Largest trajectory weight seen at any sample.
    pub max_weight: f64,
}

pub const ENSEMBLE_HEADER: [&str; 5] = ["t", "n_mc", "n_stderr", "n_analytic", "jumps_mean"];

impl EnsembleEstimate {
    /// CSV with the analytic column when given.
    pub fn write_csv<W: Write>(&self, w: W, analytic: Option<&[f64]>) -> std::io::Result<()> {
        match analytic {
            Some(a) => crate::io::write_columns(
                w,
                &ENSEMBLE_HEADER,
                &[&self.t, &self.n_mean, &self.n_stderr, a, &self.jumps_mean],
            ),
            None => crate::io::write_columns(
                w,
                &[ENSEMBLE_HEADER[0], ENSEMBLE_HEADER[1], ENSEMBLE_HEADER[2], ENSEMBLE_HEADER[4]],
                &[&self.t, &self.n_mean, &self.n_stderr, &self.jumps_mean],
            ),
        }
    }
}

/// Welford accumulator, fed in trajectory-index order.
#[derive(Clone, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

/// Runs `n_traj` trajectories; results do not depend on the worker count.
pub fn run_ensemble(config: &TrajectoryConfig, grid: &CoefficientGrid) -> Result<EnsembleEstimate> {
    if config.n_traj < 2 {
        return Err(Error::InvalidParameter("n_traj must be >= 2".into()));
    }
    config.validate(grid)?;
    let mut prop = Propagator::new(grid, config.beta)?;
    prop.max_step = config.max_step;
    prop.eps_trunc = config.eps_trunc;
    let init = init_state(config.initial, config.n_max)?;
    let n0 = init.n_element().re;

    let run = || -> Result<EnsembleEstimate> {
        let m = config.t_grid.len();
        let mut acc = vec![Moments::default(); m];
        let mut jump_sum = vec![0u64; m];
        let mut hist: Vec<u64> = Vec::new();
        let mut max_weight: f64 = 1.0;
        for start in (0..config.n_traj).step_by(CHUNK) {
            let end = (start + CHUNK).min(config.n_traj);
            let block: Vec<TrajectoryRecord> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trajectory_rng(config.seed, i as u64);
                    run_trajectory(config, &prop, &mut rng)
                })
                .collect::<Result<_>>()?;
            for rec in &block {
                for (j, x) in rec.values().enumerate() {
                    acc[j].push(x);
                }
                for (j, k) in rec.jumps_before.iter().enumerate() {
                    jump_sum[j] += u64::from(*k);
                }
                max_weight = rec.weight.iter().copied().fold(max_weight, f64::max);
                let k = rec.jumps.len();
                if hist.len() <= k {
                    hist.resize(k + 1, 0);
                }
                hist[k] += 1;
            }
        }
        let total = config.n_traj as f64;
        let raw_mean: Vec<f64> = acc.iter().map(|a| a.mean).collect();
        let raw_stderr: Vec<f64> = acc.iter().map(Moments::stderr).collect();
        let multi: u64 = hist.iter().skip(2).sum();
        Ok(EnsembleEstimate {
            t: config.t_grid.clone(),
            n_mean: raw_mean.iter().map(|r| n0 + (r - n0) / config.beta).collect(),
            n_stderr: raw_stderr.iter().map(|s| s / config.beta).collect(),
            raw_mean,
            raw_stderr,
            jumps_mean: jump_sum.iter().map(|&s| s as f64 / total).collect(),
            jump_histogram: hist,
            multi_jump_fraction: multi as f64 / total,
            n0,
            beta: config.beta,
            n_traj: config.n_traj,
            max_weight,
        })
    };

    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::heating_at;
    use crate::coefficients::{build_grid, uniform_grid, GridOptions, ReservoirSpec};

    fn constant_grid(delta: f64, gamma: f64, t_max: f64, n: usize) -> CoefficientGrid {
        let t = uniform_grid(t_max, n).unwrap();
        CoefficientGrid::from_rates(t, vec![delta; n], vec![gamma; n]).unwrap()
    }

    #[test]
    fn zero_coupling_ensemble() {
        let grid = constant_grid(0.0, 0.0, 10.0, 11);
        let mut cfg = TrajectoryConfig::new(
            InitialCondition::Coherent(Complex64::new(1.2, 0.3)),
            vec![0.0, 2.0, 5.0, 10.0],
        );
        cfg.n_traj = 20;
        let est = run_ensemble(&cfg, &grid).unwrap();
        let n0 = 1.2f64 * 1.2 + 0.09;
        for (m, s) in est.n_mean.iter().zip(&est.n_stderr) {
            assert!((m - n0).abs() < 1e-10);
            assert_eq!(*s, 0.0);
        }
        assert_eq!(est.jump_histogram, vec![20]);
    }

    #[test]
    fn forced_jump_two_segment_trajectory() {
        // eta draws are consumed in order: jump-time, channel, jump-time
        struct Seq(Vec<u64>, usize);
        impl rand::RngCore for Seq {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                let v = self.0[self.1];
                self.1 += 1;
                v
            }
            fn fill_bytes(&mut self, dst: &mut [u8]) {
                rand::rand_core::impls::fill_bytes_via_next(self, dst)
            }
        }
        // f64 draws use the top 53 bits
        let enc = |x: f64| ((x * (1u64 << 53) as f64) as u64) << 11;
        let grid = constant_grid(0.1, 0.3, 10.0, 11);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let mut cfg = TrajectoryConfig::new(InitialCondition::Fock(0), vec![0.5, 1.5, 3.0]);
        cfg.n_max = 4;
        let mut rng = Seq(vec![enc(0.3), enc(0.1), enc(0.999_999)], 0);
        let rec = run_trajectory(&cfg, &prop, &mut rng).unwrap();
        // c1 = -0.2: jump at -ln 0.7 / 0.2, channel Raise with sign -1
        let tj = -(0.7f64).ln() / 0.2;
        assert_eq!(rec.jumps.len(), 1);
        assert!((rec.jumps[0].0 - tj).abs() < 1e-9);
        assert_eq!(rec.jumps[0].1, Channel::Raise);
        assert_eq!(rec.n_element[0], Complex64::new(0.0, 0.0));
        assert!((rec.weight[0] - (0.4f64 * 0.5).exp()).abs() < 1e-12);
        assert!((rec.n_element[2].re + 1.0).abs() < 1e-12);
        // after the jump, level 1: log-weight grows at 2 * 2 * 0.2
        let lw = 0.4 * tj + 0.8 * (3.0 - tj);
        assert!((rec.weight[2] - lw.exp()).abs() < 1e-9 * lw.exp());
        assert_eq!(rec.jumps_before, vec![0, 0, 1]);
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let spec = ReservoirSpec::new(0.1, 1.0, 1.0).unwrap();
        let grid = build_grid(&spec, &uniform_grid(10.0, 401).unwrap(), &GridOptions::default())
            .unwrap();
        let mut cfg = TrajectoryConfig::new(
            InitialCondition::Fock(0),
            (0..=10).map(f64::from).collect(),
        );
        cfg.n_traj = 1500;
        cfg.beta = 5.0;
        cfg.seed = 11;
        cfg.workers = Some(1);
        let a = run_ensemble(&cfg, &grid).unwrap();
        cfg.workers = Some(4);
        let b = run_ensemble(&cfg, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.jump_histogram.iter().sum::<u64>(), 1500);
        cfg.seed = 12;
        assert_ne!(run_ensemble(&cfg, &grid).unwrap().n_mean, a.n_mean);
    }

    #[test]
    fn lindblad_regime_records_are_nonnegative() {
        let grid = constant_grid(0.3, 0.1, 10.0, 101);
        let prop = Propagator::new(&grid, 1.0).unwrap();
        let cfg = TrajectoryConfig::new(InitialCondition::Fock(1), vec![1.0, 4.0, 9.0]);
        for i in 0..200 {
            let rec = run_trajectory(&cfg, &prop, &mut trajectory_rng(3, i)).unwrap();
            assert!(rec.n_element.iter().all(|z| z.re >= 0.0 && z.im == 0.0));
            assert!(rec.weight.iter().all(|w| *w == 1.0));
        }
    }

    /// Constant rates: the ensemble solves the Markov heating equation.
    #[test]
    fn markov_heating_with_negative_absorption_coefficient() {
        // Delta < gamma makes c1 negative; the weighted ensemble still
        // reproduces dn/dt = Delta - gamma (2n + 1).
        let (d, g) = (0.05, 0.1);
        let grid = constant_grid(d, g, 4.0, 401);
        let mut cfg = TrajectoryConfig::new(InitialCondition::Fock(2), vec![1.0, 2.0, 4.0]);
        cfg.n_traj = 20000;
        cfg.seed = 5;
        let est = run_ensemble(&cfg, &grid).unwrap();
        let stat = (d / g - 1.0) / 2.0;
        for (t, (m, s)) in est.t.iter().zip(est.n_mean.iter().zip(&est.n_stderr)) {
            let exact = stat + (2.0 - stat) * (-2.0 * g * t).exp();
            assert!((m - exact).abs() < 4.0 * s, "t = {t}: {m} vs {exact} +- {s}");
        }
        // cross-check the analytic module on the same grid
        let h = heating_at(&grid, 2.0, 4.0).unwrap();
        assert!((h - (stat + (2.0 - stat) * (-0.8f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn invalid_configs() {
        let grid = constant_grid(0.1, 0.1, 10.0, 11);
        let mut cfg = TrajectoryConfig::new(InitialCondition::Fock(0), vec![1.0, 20.0]);
        assert!(matches!(run_ensemble(&cfg, &grid), Err(Error::OutOfGrid { .. })));
        cfg.t_grid = vec![2.0, 1.0];
        assert!(run_ensemble(&cfg, &grid).is_err());
        cfg.t_grid = vec![1.0];
        cfg.n_traj = 1;
        assert!(run_ensemble(&cfg, &grid).is_err());
        cfg.n_traj = 10;
        cfg.beta = 0.0;
        assert!(run_ensemble(&cfg, &grid).is_err());
    }
}
