#ifndef OVERSMOOTH_H
#define OVERSMOOTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  OS_STATUS_OK = 0,
  OS_STATUS_NULL_POINTER = 1,
  OS_STATUS_INVALID_ARGUMENT = 2,
  OS_STATUS_DIMENSION_MISMATCH = 3,
  OS_STATUS_A1_VIOLATED = 4,
  OS_STATUS_A4_VIOLATED = 5,
  OS_STATUS_OVERFLOW = 6,
  OS_STATUS_EPSILON_TOO_LARGE = 7,
  OS_STATUS_BUDGET_EXCEEDED = 8,
  OS_STATUS_NO_CONVERGENCE = 9,
  OS_STATUS_IO = 10,
  OS_STATUS_PANIC = 11,
  OS_STATUS_OTHER = 12,
} OsStatus;

typedef enum {
  OS_GRAPH_KIND_ERDOS_RENYI = 0,
  OS_GRAPH_KIND_CYCLE = 1,
  OS_GRAPH_KIND_COMPLETE = 2,
  OS_GRAPH_KIND_STAR = 3,
  OS_GRAPH_KIND_PATH = 4,
} OsGraphKind;

typedef enum {
  OS_NORM_ONE = 0,
  OS_NORM_TWO = 1,
  OS_NORM_INF = 2,
  OS_NORM_FROBENIUS = 3,
  OS_NORM_MAX = 4,
} OsNorm;

typedef enum {
  OS_NONLINEARITY_IDENTITY = 0,
  OS_NONLINEARITY_RELU = 1,
  /**
   * Slope in `param`.
   */
  OS_NONLINEARITY_LEAKY_RELU = 2,
  OS_NONLINEARITY_GELU = 3,
  OS_NONLINEARITY_SILU = 4,
  OS_NONLINEARITY_TANH = 5,
  /**
   * Alpha in `param`.
   */
  OS_NONLINEARITY_ELU = 6,
} OsNonlinearity;

typedef enum {
  OS_ATTENTION_GAT = 0,
  OS_ATTENTION_GAT_V2 = 1,
  OS_ATTENTION_DOT_PRODUCT = 2,
  /**
   * Random-walk aggregation `D⁻¹A`.
   */
  OS_ATTENTION_CONSTANT = 3,
} OsAttention;

/**
 * Opaque graph handle.
 */
typedef struct OsGraph OsGraph;

/**
 * Opaque trajectory handle.
 */
typedef struct OsTrajectory OsTrajectory;

typedef struct {
  double lambda;
  double lambda_modulus;
  double jsr_lower;
  double jsr_upper;
  double rho_reduced_random_walk;
  double identity_error;
  bool holds;
} OsLambdaReport;

/**
 * Settings for [`os_trajectory_run`]. Weights are drawn per layer with
 * `‖|W|‖_∞ = 1`; attention parameters are `N(0, gain²)`.
 */
typedef struct {
  OsNonlinearity nonlinearity;
  double nonlinearity_param;
  OsAttention attention;
  double attention_gain;
  double leaky_slope;
  size_t hidden_dim;
  size_t depth;
  /**
   * Entries uniform on `[0, 1)` instead of `(−1, 1)`.
   */
  bool nonnegative_weights;
  uint64_t seed;
} OsRunConfig;

typedef struct {
  double mu_min;
  double mu_max;
  double max_state_drift;
} OsCounterexample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the length the full message
 * needs including the NUL, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t os_last_error_message(char *buf, size_t len);

/**
 * Generates a graph. `p` is used by Erdős–Rényi only.
 *
 * # Safety
 * `out` must be valid for writes.
 */
OsStatus os_graph_generate(OsGraphKind kind,
                           size_t n,
                           double p,
                           uint64_t seed,
                           bool self_loops,
                           OsGraph **out_graph);

/**
 * Builds a graph from `n_edges` pairs stored as `edges[2k], edges[2k+1]`.
 *
 * # Safety
 * `edges` must hold `2 * n_edges` values (or be null when `n_edges` is 0)
 * and `out_graph` must be valid for writes.
 */
OsStatus os_graph_from_edges(size_t n,
                             const size_t *edges,
                             size_t n_edges,
                             bool self_loops,
                             OsGraph **out_graph);

/**
 * # Safety
 * `graph` must be null or a handle from this library not yet freed.
 */
void os_graph_free(OsGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out_n` must be valid for writes.
 */
OsStatus os_graph_num_nodes(const OsGraph *graph, size_t *out_n);

/**
 * Second largest eigenvalue of `D^{−1/2} A D^{−1/2}`.
 *
 * # Safety
 * `graph` must be a live handle; `out_lambda` must be valid for writes.
 */
OsStatus os_graph_lambda(const OsGraph *graph, double *out_lambda);

/**
 * `μ(X)` for a row-major `rows × cols` matrix.
 *
 * # Safety
 * `x` must hold `rows * cols` values; `out_mu` must be valid for writes.
 */
OsStatus os_mu(const double *x, size_t rows, size_t cols, double *out_mu);

/**
 * # Safety
 * `m` must hold `rows * cols` values; `out_norm` must be valid for writes.
 */
OsStatus os_matrix_norm(const double *m, size_t rows, size_t cols, OsNorm kind, double *out_norm);

/**
 * # Safety
 * `m` must hold `n * n` values; `out_rho` must be valid for writes.
 */
OsStatus os_spectral_radius(const double *m, size_t n, double *out_rho);

/**
 * Positivity horizon `T` and entry floor `c = ε^T`.
 *
 * # Safety
 * `graph` must be a live handle; the out-pointers must be valid for writes.
 */
OsStatus os_positivity_horizon(const OsGraph *graph, double eps, size_t *out_t, double *out_c);

/**
 * # Safety
 * `graph` must be a live handle; `out_report` must be valid for writes.
 */
OsStatus os_lambda_vs_jsr(const OsGraph *graph,
                          double eps,
                          size_t k_max,
                          size_t samples,
                          uint64_t seed,
                          OsLambdaReport *out_report);

/**
 * Runs `cfg.depth` layers from `x0` (row-major, `n_nodes × cols`). Pass a
 * null `x0` to draw standard normal features with `cols` columns from
 * `cfg.seed`.
 *
 * # Safety
 * `graph` must be a live handle, `x0` null or holding `n_nodes * cols`
 * values, and `out_traj` valid for writes.
 */
OsStatus os_trajectory_run(const OsGraph *graph,
                           const double *x0,
                           size_t cols,
                           const OsRunConfig *cfg,
                           OsTrajectory **out_traj);

/**
 * # Safety
 * `traj` must be null or a handle from this library not yet freed.
 */
void os_trajectory_free(OsTrajectory *traj);

/**
 * Number of layers run.
 *
 * # Safety
 * `traj` must be a live handle; `out_depth` must be valid for writes.
 */
OsStatus os_trajectory_depth(const OsTrajectory *traj, size_t *out_depth);

/**
 * Copies `μ(X^(t))` for `t = 0..=depth` into `buf`.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
OsStatus os_trajectory_mu(const OsTrajectory *traj, double *buf, size_t len);

/**
 * Shape of `X^(layer)`.
 *
 * # Safety
 * `traj` must be a live handle; the out-pointers must be valid for writes.
 */
OsStatus os_trajectory_state_shape(const OsTrajectory *traj,
                                   size_t layer,
                                   size_t *out_rows,
                                   size_t *out_cols);

/**
 * Copies `X^(layer)` row-major into `buf`.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
OsStatus os_trajectory_state(const OsTrajectory *traj, size_t layer, double *buf, size_t len);

/**
 * Runs the two-node fixed-point system for `steps` layers.
 *
 * # Safety
 * `out_result` must be valid for writes.
 */
OsStatus os_counterexample(size_t steps, OsCounterexample *out_result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OVERSMOOTH_H */
