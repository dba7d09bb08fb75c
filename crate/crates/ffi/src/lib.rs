//! C ABI for the `qbmlab` core.
//!
//! Every entry point returns a [`QbmStatus`]. On failure a message is kept
//! per thread and can be read with [`qbm_last_error`]. Handles are opaque
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qbmlab::analytic::{heating_at, mandel_q_at};
use qbmlab::border::{classify, critical_r_high_t, default_horizon, Classification};
use qbmlab::coefficients::{build_grid, uniform_grid, CoefficientGrid, GridOptions, ReservoirSpec};
use qbmlab::nmwf::{run_ensemble, EnsembleEstimate, InitialCondition, TrajectoryConfig};
use qbmlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbmStatus {
    Ok = 0,
    /// Null pointer or undersized output buffer.
    InvalidArgument = 1,
    /// Parameter outside its domain.
    Validation = 2,
    /// A numerical routine failed.
    Numerical = 3,
    /// Internal panic caught at the boundary.
    Panic = 4,
}

/// Columns of a coefficient grid.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbmGridColumn {
    Time = 0,
    Delta = 1,
    Gamma = 2,
    BigGamma = 3,
    DeltaBigGamma = 4,
    IPlus = 5,
    IMinus = 6,
}

/// Columns of an ensemble estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbmEnsembleColumn {
    Time = 0,
    Mean = 1,
    Stderr = 2,
    JumpsMean = 3,
}

/// Monte Carlo settings. `fock_n` selects the initial Fock state.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QbmMcConfig {
    pub fock_n: u32,
    pub n_max: usize,
    pub beta: f64,
    pub seed: u64,
    pub n_traj: usize,
    /// Equally spaced sample times on `[0, grid end]`.
    pub samples: usize,
    /// 0 uses all cores.
    pub workers: usize,
}

/// Coefficients of one reservoir on a uniform time grid.
pub struct QbmGrid {
    grid: CoefficientGrid,
}

/// Result of a Monte Carlo run.
pub struct QbmEnsemble {
    est: EnsembleEstimate,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QbmStatus, msg: impl Into<String>) -> QbmStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> QbmStatus {
    let status = if e.is_validation() {
        QbmStatus::Validation
    } else {
        QbmStatus::Numerical
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> QbmStatus) -> QbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(QbmStatus::Panic, msg)
        }
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds `Delta`, `gamma` and their integrals on `n` equally spaced points
/// of `[0, tmax]` at temperature `theta = kT / omega_0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_grid_new(
    alpha: f64,
    r: f64,
    theta: f64,
    tmax: f64,
    n: usize,
    out: *mut *mut QbmGrid,
) -> QbmStatus {
    guard(|| {
        if out.is_null() {
            return fail(QbmStatus::InvalidArgument, "out is null");
        }
        let built = ReservoirSpec::new(alpha, r, theta)
            .and_then(|spec| build_grid(&spec, &uniform_grid(tmax, n)?, &GridOptions::default()));
        match built {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(QbmGrid { grid }));
                QbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `grid` must come from [`qbm_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qbm_grid_free(grid: *mut QbmGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_grid_len(grid: *const QbmGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.len())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> QbmStatus {
    if out.is_null() {
        return fail(QbmStatus::InvalidArgument, "out is null");
    }
    if len < src.len() {
        return fail(
            QbmStatus::InvalidArgument,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    QbmStatus::Ok
}

/// Copies one column into `out`, which must hold at least
/// [`qbm_grid_len`] values.
///
/// # Safety
/// `grid` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_grid_column(
    grid: *const QbmGrid,
    column: QbmGridColumn,
    out: *mut f64,
    len: usize,
) -> QbmStatus {
    guard(|| {
        let Some(g) = grid.as_ref() else {
            return fail(QbmStatus::InvalidArgument, "grid is null");
        };
        let g = &g.grid;
        let src = match column {
            QbmGridColumn::Time => &g.t,
            QbmGridColumn::Delta => &g.delta,
            QbmGridColumn::Gamma => &g.gamma,
            QbmGridColumn::BigGamma => &g.big_gamma,
            QbmGridColumn::DeltaBigGamma => &g.delta_big_gamma,
            QbmGridColumn::IPlus => &g.i_plus,
            QbmGridColumn::IMinus => &g.i_minus,
        };
        copy_out(src, out, len)
    })
}

unsafe fn eval(grid: *const QbmGrid, out: *mut f64, f: impl FnOnce(&CoefficientGrid) -> qbmlab::Result<f64>) -> QbmStatus {
    guard(|| {
        let Some(g) = grid.as_ref() else {
            return fail(QbmStatus::InvalidArgument, "grid is null");
        };
        if out.is_null() {
            return fail(QbmStatus::InvalidArgument, "out is null");
        }
        match f(&g.grid) {
            Ok(v) => {
                *out = v;
                QbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Mean occupation at time `t` for initial occupation `n0`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbm_heating(grid: *const QbmGrid, n0: f64, t: f64, out: *mut f64) -> QbmStatus {
    eval(grid, out, |g| heating_at(g, n0, t))
}

/// Mandel Q at time `t` for initial occupation `n0` and Mandel `q0`.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbm_mandel_q(
    grid: *const QbmGrid,
    n0: f64,
    q0: f64,
    t: f64,
    out: *mut f64,
) -> QbmStatus {
    eval(grid, out, |g| mandel_q_at(g, n0, q0, t))
}

/// Writes 1 for a Lindblad-type reservoir and 0 otherwise. A horizon
/// `<= 0` selects the default.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbm_classify(
    alpha: f64,
    r: f64,
    theta: f64,
    horizon: f64,
    out: *mut i32,
) -> QbmStatus {
    guard(|| {
        if out.is_null() {
            return fail(QbmStatus::InvalidArgument, "out is null");
        }
        let h = if horizon > 0.0 { horizon } else { default_horizon(r) };
        match ReservoirSpec::new(alpha, r, theta).and_then(|s| classify(&s, h)) {
            Ok(c) => {
                *out = i32::from(c == Classification::LindbladType);
                QbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Critical cutoff ratio of the high-temperature diffusion coefficient.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qbm_critical_r(tol: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        if out.is_null() {
            return fail(QbmStatus::InvalidArgument, "out is null");
        }
        match critical_r_high_t(None, tol) {
            Ok(r) => {
                *out = r;
                QbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Default Monte Carlo settings.
#[no_mangle]
pub extern "C" fn qbm_mc_config_default() -> QbmMcConfig {
    QbmMcConfig {
        fock_n: 0,
        n_max: 30,
        beta: 1.0,
        seed: 0,
        n_traj: 10_000,
        samples: 50,
        workers: 0,
    }
}

/// Runs the doubled-space Monte Carlo on `grid`.
///
/// # Safety
/// `grid` must be a live handle, `config` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qbm_ensemble_run(
    grid: *const QbmGrid,
    config: *const QbmMcConfig,
    out: *mut *mut QbmEnsemble,
) -> QbmStatus {
    guard(|| {
        let (Some(g), Some(c)) = (grid.as_ref(), config.as_ref()) else {
            return fail(QbmStatus::InvalidArgument, "grid or config is null");
        };
        if out.is_null() {
            return fail(QbmStatus::InvalidArgument, "out is null");
        }
        if c.samples < 2 {
            return fail(QbmStatus::Validation, "samples must be >= 2");
        }
        let g = &g.grid;
        let tmax = g.t_end();
        let times = (0..c.samples)
            .map(|k| tmax * k as f64 / (c.samples - 1) as f64)
            .collect();
        let mut cfg = TrajectoryConfig::new(InitialCondition::Fock(c.fock_n), times);
        cfg.n_max = c.n_max;
        cfg.beta = c.beta;
        cfg.seed = c.seed;
        cfg.n_traj = c.n_traj;
        cfg.workers = (c.workers > 0).then_some(c.workers);
        match run_ensemble(&cfg, g) {
            Ok(est) => {
                *out = Box::into_raw(Box::new(QbmEnsemble { est }));
                QbmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `ens` must come from [`qbm_ensemble_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qbm_ensemble_free(ens: *mut QbmEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of sample times, 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_ensemble_len(ens: *const QbmEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.est.t.len())
}

/// # Safety
/// `ens` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_ensemble_column(
    ens: *const QbmEnsemble,
    column: QbmEnsembleColumn,
    out: *mut f64,
    len: usize,
) -> QbmStatus {
    guard(|| {
        let Some(e) = ens.as_ref() else {
            return fail(QbmStatus::InvalidArgument, "ensemble is null");
        };
        let src = match column {
            QbmEnsembleColumn::Time => &e.est.t,
            QbmEnsembleColumn::Mean => &e.est.n_mean,
            QbmEnsembleColumn::Stderr => &e.est.n_stderr,
            QbmEnsembleColumn::JumpsMean => &e.est.jumps_mean,
        };
        copy_out(src, out, len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn error_message_round_trip() {
        let mut g = ptr::null_mut();
        let s = unsafe { qbm_grid_new(0.1, -1.0, 1.0, 1.0, 10, &mut g) };
        assert_eq!(s, QbmStatus::Validation);
        assert!(g.is_null());
        let msg = unsafe { CStr::from_ptr(qbm_last_error()) }.to_str().unwrap();
        assert!(msg.contains("r = -1"), "{msg}");
    }

    #[test]
    fn null_pointers_are_rejected() {
        assert_eq!(
            unsafe { qbm_grid_new(0.1, 1.0, 1.0, 1.0, 10, ptr::null_mut()) },
            QbmStatus::InvalidArgument
        );
        let mut v = 0.0;
        assert_eq!(unsafe { qbm_heating(ptr::null(), 0.0, 0.0, &mut v) }, QbmStatus::InvalidArgument);
        assert_eq!(unsafe { qbm_grid_len(ptr::null()) }, 0);
        unsafe { qbm_grid_free(ptr::null_mut()) };
    }
}
