#ifndef QBMLAB_H
#define QBMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Columns of an ensemble estimate.
 */
typedef enum QbmEnsembleColumn {
  QBM_ENSEMBLE_COLUMN_TIME = 0,
  QBM_ENSEMBLE_COLUMN_MEAN = 1,
  QBM_ENSEMBLE_COLUMN_STDERR = 2,
  QBM_ENSEMBLE_COLUMN_JUMPS_MEAN = 3,
} QbmEnsembleColumn;

/**
 * Columns of a coefficient grid.
 */
typedef enum QbmGridColumn {
  QBM_GRID_COLUMN_TIME = 0,
  QBM_GRID_COLUMN_DELTA = 1,
  QBM_GRID_COLUMN_GAMMA = 2,
  QBM_GRID_COLUMN_BIG_GAMMA = 3,
  QBM_GRID_COLUMN_DELTA_BIG_GAMMA = 4,
  QBM_GRID_COLUMN_I_PLUS = 5,
  QBM_GRID_COLUMN_I_MINUS = 6,
} QbmGridColumn;

typedef enum QbmStatus {
  QBM_STATUS_OK = 0,
  /**
   * Null pointer or undersized output buffer.
   */
  QBM_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Parameter outside its domain.
   */
  QBM_STATUS_VALIDATION = 2,
  /**
   * A numerical routine failed.
   */
  QBM_STATUS_NUMERICAL = 3,
  /**
   * Internal panic caught at the boundary.
   */
  QBM_STATUS_PANIC = 4,
} QbmStatus;

/**
 * Result of a Monte Carlo run.
 */
typedef struct QbmEnsemble QbmEnsemble;

/**
 * Coefficients of one reservoir on a uniform time grid.
 */
typedef struct QbmGrid QbmGrid;

/**
 * Monte Carlo settings. `fock_n` selects the initial Fock state.
 */
typedef struct QbmMcConfig {
  uint32_t fock_n;
  size_t n_max;
  double beta;
  uint64_t seed;
  size_t n_traj;
  /**
   * Equally spaced sample times on `[0, grid end]`.
   */
  size_t samples;
  /**
   * 0 uses all cores.
   */
  size_t workers;
} QbmMcConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qbm_last_error(void);

/**
 * Builds `Delta`, `gamma` and their integrals on `n` equally spaced points
 * of `[0, tmax]` at temperature `theta = kT / omega_0`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QbmStatus qbm_grid_new(double alpha,
                            double r,
                            double theta,
                            double tmax,
                            size_t n,
                            struct QbmGrid **out);

/**
 * # Safety
 * `grid` must come from [`qbm_grid_new`] and not be used afterwards.
 */
void qbm_grid_free(struct QbmGrid *grid);

/**
 * Number of grid points, 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t qbm_grid_len(const struct QbmGrid *grid);

/**
 * Copies one column into `out`, which must hold at least
 * [`qbm_grid_len`] values.
 *
 * # Safety
 * `grid` must be a live handle and `out` valid for `len` writes.
 */
enum QbmStatus qbm_grid_column(const struct QbmGrid *grid,
                               enum QbmGridColumn column,
                               double *out,
                               size_t len);

/**
 * Mean occupation at time `t` for initial occupation `n0`.
 *
 * # Safety
 * `grid` must be a live handle and `out` a valid pointer.
 */
enum QbmStatus qbm_heating(const struct QbmGrid *grid, double n0, double t, double *out);

/**
 * Mandel Q at time `t` for initial occupation `n0` and Mandel `q0`.
 *
 * # Safety
 * `grid` must be a live handle and `out` a valid pointer.
 */
enum QbmStatus qbm_mandel_q(const struct QbmGrid *grid,
                            double n0,
                            double q0,
                            double t,
                            double *out);

/**
 * Writes 1 for a Lindblad-type reservoir and 0 otherwise. A horizon
 * `<= 0` selects the default.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QbmStatus qbm_classify(double alpha, double r, double theta, double horizon, int32_t *out);

/**
 * Critical cutoff ratio of the high-temperature diffusion coefficient.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QbmStatus qbm_critical_r(double tol, double *out);

/**
 * Default Monte Carlo settings.
 */
struct QbmMcConfig qbm_mc_config_default(void);

/**
 * Runs the doubled-space Monte Carlo on `grid`.
 *
 * # Safety
 * `grid` must be a live handle, `config` and `out` valid pointers.
 */
enum QbmStatus qbm_ensemble_run(const struct QbmGrid *grid,
                                const struct QbmMcConfig *config,
                                struct QbmEnsemble **out);

/**
 * # Safety
 * `ens` must come from [`qbm_ensemble_run`] and not be used afterwards.
 */
void qbm_ensemble_free(struct QbmEnsemble *ens);

/**
 * Number of sample times, 0 for a null handle.
 *
 * # Safety
 * `ens` must be null or a live handle.
 */
size_t qbm_ensemble_len(const struct QbmEnsemble *ens);

/**
 * # Safety
 * `ens` must be a live handle and `out` valid for `len` writes.
 */
enum QbmStatus qbm_ensemble_column(const struct QbmEnsemble *ens,
                                   enum QbmEnsembleColumn column,
                                   double *out,
                                   size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QBMLAB_H */
