#ifndef PSPIN_H
#define PSPIN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PspinStatus {
  PSPIN_STATUS_OK = 0,
  PSPIN_STATUS_NULL_POINTER = 1,
  PSPIN_STATUS_INVALID_ARGUMENT = 2,
  PSPIN_STATUS_OUT_OF_RANGE = 3,
  PSPIN_STATUS_UNSUPPORTED = 4,
  PSPIN_STATUS_SOLVER_FAILED = 5,
  PSPIN_STATUS_SIMULATION_FAILED = 6,
  PSPIN_STATUS_IO = 7,
  PSPIN_STATUS_PANIC = 8,
} PspinStatus;

typedef enum PspinField {
  PSPIN_FIELD_R = 0,
  PSPIN_FIELD_C = 1,
  PSPIN_FIELD_CHI = 2,
} PspinField;

typedef enum PspinConfinementKind {
  PSPIN_CONFINEMENT_KIND_POLYNOMIAL = 0,
  PSPIN_CONFINEMENT_KIND_CONSTANT_FPRIME = 1,
} PspinConfinementKind;

typedef struct PspinModel PspinModel;

typedef struct PspinObservables PspinObservables;

typedef struct PspinSolution PspinSolution;

/**
 * `kind` is a [`PspinConfinementKind`]; `kappa` and `r` are read for the
 * polynomial kind, `z` for the constant one.
 */
typedef struct PspinConfinement {
  uint32_t kind;
  double kappa;
  uint32_t r;
  double z;
} PspinConfinement;

typedef struct PspinSolverParams {
  double h;
  double t_max;
  double k0;
  double corrector_tol;
  uint32_t corrector_max_iter;
  /**
   * Nonzero selects the hard spherical constraint.
   */
  uint8_t hard;
} PspinSolverParams;

/**
 * `init_variance <= 0` starts uniformly on the sphere, otherwise iid Gaussian.
 */
typedef struct PspinSimParams {
  double dt;
  double t_max;
  uint32_t snapshot_stride;
  uint32_t n_realizations;
  uint64_t seed;
  double init_variance;
} PspinSimParams;

typedef struct PspinComparison {
  size_t n_times;
  double sup_c;
  double rms_c;
  double sup_chi;
  double rms_chi;
  double max_stderr_c;
  double max_stderr_chi;
  uint8_t passed;
} PspinComparison;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (always NUL
 * terminated when `len > 0`) and returns the full message length, or 0
 * when there is none.
 */
size_t pspin_last_error(char *buf, size_t len);

/**
 * Static version string.
 */
const char *pspin_version(void);

/**
 * Default confinement `f(rho) = 5 (rho - 1)^2`.
 */
struct PspinConfinement pspin_confinement_default(void);

struct PspinSolverParams pspin_solver_params_default(void);

struct PspinSimParams pspin_sim_params_default(void);

/**
 * Creates a model from `a[0..m]` (`a[p-1]` multiplies the order-`p` term).
 */
enum PspinStatus pspin_model_new(const double *a,
                                 size_t m,
                                 double beta,
                                 struct PspinConfinement confinement,
                                 size_t n,
                                 struct PspinModel **out);

/**
 * `decoupled != 0` selects iid entries over ordered index tuples.
 */
enum PspinStatus pspin_model_set_decoupled(struct PspinModel *model, uint8_t decoupled);

void pspin_model_free(struct PspinModel *model);

enum PspinStatus pspin_solve(const struct PspinModel *model,
                             const struct PspinSolverParams *params,
                             struct PspinSolution **out);

/**
 * Number of grid times, 0 for a null handle.
 */
size_t pspin_solution_len(const struct PspinSolution *sol);

double pspin_solution_step(const struct PspinSolution *sol);

/**
 * Value of `field` (a [`PspinField`]) at grid nodes `(i, j)`; off-triangle
 * reads follow the solution's conventions.
 */
enum PspinStatus pspin_solution_get(const struct PspinSolution *sol,
                                    uint32_t field,
                                    size_t i,
                                    size_t j,
                                    double *out);

/**
 * Copies `K` into `buf[0..len]`; `len` must equal the grid size.
 */
enum PspinStatus pspin_solution_k(const struct PspinSolution *sol, double *buf, size_t len);

void pspin_solution_free(struct PspinSolution *sol);

enum PspinStatus pspin_simulate(const struct PspinModel *model,
                                const struct PspinSimParams *params,
                                struct PspinObservables **out);

size_t pspin_observables_len(const struct PspinObservables *obs);

/**
 * Snapshot time `i`, NaN when out of range.
 */
double pspin_observables_time(const struct PspinObservables *obs, size_t i);

/**
 * Realization mean of `field` (`C` or `chi`) at snapshot indices `(i, j)`; `R` is not
 * measured and yields `PSPIN_STATUS_UNSUPPORTED`.
 */
enum PspinStatus pspin_observables_get(const struct PspinObservables *obs,
                                       uint32_t field,
                                       size_t i,
                                       size_t j,
                                       double *out);

void pspin_observables_free(struct PspinObservables *obs);

/**
 * Sup and RMS differences on the common snapshot grid.
 */
enum PspinStatus pspin_compare(const struct PspinObservables *obs,
                               const struct PspinSolution *sol,
                               double tol,
                               struct PspinComparison *out);

/**
 * Catalan/Bessel series `h(tau)`; NaN for negative or non-finite `tau`.
 */
double pspin_bessel_h(double tau);

enum PspinStatus pspin_catalan(uint32_t n, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSPIN_H */
