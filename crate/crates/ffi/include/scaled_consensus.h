#ifndef SCALED_CONSENSUS_H
#define SCALED_CONSENSUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_ARGUMENT = 2,
  SC_STATUS_INVALID_UTF8 = 3,
  SC_STATUS_PARSE_ERROR = 4,
  SC_STATUS_GRAPH_ERROR = 5,
  SC_STATUS_NUMERICAL_FAILURE = 6,
  SC_STATUS_IO_ERROR = 7,
  SC_STATUS_PANIC = 8,
} ScStatus;

/*
 Opaque weighted graph.
 */
typedef struct ScGraph ScGraph;

/*
 Opaque validated scenario.
 */
typedef struct ScScenario ScScenario;

/*
 Opaque simulation result.
 */
typedef struct ScTrajectory ScTrajectory;

/*
 Attracting-law parameters; `gamma1 = q/p`, `gamma2 = m/n`.
 */
typedef struct ScAlParams {
  double rho;
  double kappa1;
  double kappa2;
  uint32_t q;
  uint32_t p;
  uint32_t m;
  uint32_t n;
} ScAlParams;

typedef struct ScBounds {
  double lower;
  double upper;
} ScBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL
 terminated, truncated to `len` bytes) and returns the full message length
 in bytes excluding the terminator. Returns 0 if no error was recorded.
 `buf` may be NULL to query the length.

 # Safety
 `buf` must be NULL or valid for `len` writable bytes.
 */
size_t sc_last_error_message(char *buf, size_t len);

/*
 Settling-time bounds that hold for every initial state.

 # Safety
 `params` and `out_bounds` must be NULL or valid pointers.
 */
enum ScStatus sc_bounds_state_independent(const struct ScAlParams *params,
                                          struct ScBounds *out_bounds);

/*
 Settling-time bounds for the scalar law started at `x0`.

 # Safety
 `params` and `out_bounds` must be NULL or valid pointers.
 */
enum ScStatus sc_bounds_state_dependent(const struct ScAlParams *params,
                                        double x0,
                                        struct ScBounds *out_bounds);

/*
 Parameters of the scalar law obeyed by `sqrt(V)` on a network with
 algebraic connectivity `lambda2` and `n_agents` agents.

 # Safety
 `params` and `out_params` must be NULL or valid pointers.
 */
enum ScStatus sc_transformed_params(const struct ScAlParams *params,
                                    double lambda2,
                                    size_t n_agents,
                                    struct ScAlParams *out_params);

/*
 Builds a graph from an `n x n` row-major weight matrix.

 # Safety
 `weights` must be valid for `n * n` reads; `out_graph` must be NULL or
 valid.
 */
enum ScStatus sc_graph_new(const double *weights,
                           size_t n,
                           bool directed,
                           struct ScGraph **out_graph);

/*
 # Safety
 `graph` must be NULL or a pointer returned by [`sc_graph_new`] that has
 not been freed.
 */
void sc_graph_free(struct ScGraph *graph);

/*
 Second-smallest Laplacian eigenvalue. Directed graphs use the mirror
 graph built from their detail-balance parameters rescaled to the
 smallest integer vector, as scenarios do.

 # Safety
 `graph` and `out_lambda2` must be NULL or valid pointers.
 */
enum ScStatus sc_graph_algebraic_connectivity(const struct ScGraph *graph, double *out_lambda2);

/*
 Detail-balance parameters `p` (with `p[0] = 1`) written to `out_p`,
 which must hold `len >= n` values. `*out_valid` reports whether the graph
 is detail-balanced; `out_p` is only meaningful if it is.

 # Safety
 `out_p` must be valid for `len` writes; other pointers must be NULL or
 valid.
 */
enum ScStatus sc_graph_detail_balance(const struct ScGraph *graph,
                                      double *out_p,
                                      size_t len,
                                      bool *out_valid);

/*
 Parses and validates a TOML scenario.

 # Safety
 `toml` must be NULL or a NUL-terminated string; `out_scenario` must be
 NULL or valid.
 */
enum ScStatus sc_scenario_from_toml(const char *toml, struct ScScenario **out_scenario);

/*
 Loads one of the bundled scenarios, e.g. `"example1_c1_gal"`.

 # Safety
 `name` must be NULL or a NUL-terminated string; `out_scenario` must be
 NULL or valid.
 */
enum ScStatus sc_scenario_bundled(const char *name, struct ScScenario **out_scenario);

/*
 Algebraic connectivity used by the scenario's settling-time bounds.

 # Safety
 Pointers must be NULL or valid.
 */
enum ScStatus sc_scenario_lambda2(const struct ScScenario *scenario, double *out_lambda2);

/*
 # Safety
 `scenario` must be NULL or a live pointer from `sc_scenario_*`.
 */
void sc_scenario_free(struct ScScenario *scenario);

/*
 Integrates the scenario over its horizon.

 # Safety
 Pointers must be NULL or valid.
 */
enum ScStatus sc_scenario_simulate(const struct ScScenario *scenario,
                                   struct ScTrajectory **out_trajectory);

/*
 Number of recorded samples.

 # Safety
 Pointers must be NULL or valid.
 */
enum ScStatus sc_trajectory_len(const struct ScTrajectory *traj, size_t *out_len);

/*
 Number of agents.

 # Safety
 Pointers must be NULL or valid.
 */
enum ScStatus sc_trajectory_agents(const struct ScTrajectory *traj, size_t *out_agents);

/*
 First sample time after which the scaled-state spread stays below
 epsilon. `*out_settled` is false (and `*out_time` untouched) if the run
 never settled.

 # Safety
 Pointers must be NULL or valid.
 */
enum ScStatus sc_trajectory_settling_time(const struct ScTrajectory *traj,
                                          double *out_time,
                                          bool *out_settled);

/*
 Copies sample `k`: its time, raw states `x` and scaled states `g`.
 `x` and `g` may be NULL; otherwise they must hold `n` values, where `n`
 is at least the number of agents.

 # Safety
 Non-NULL buffers must be valid for `n` writes.
 */
enum ScStatus sc_trajectory_sample(const struct ScTrajectory *traj,
                                   size_t k,
                                   double *out_t,
                                   double *x,
                                   double *g,
                                   size_t n);

/*
 Writes the trajectory as CSV (`t,x_1..x_N,g_1..g_N,V`).

 # Safety
 `path` must be NULL or a NUL-terminated string.
 */
enum ScStatus sc_trajectory_write_csv(const struct ScTrajectory *traj, const char *path);

/*
 # Safety
 `traj` must be NULL or a live pointer from [`sc_scenario_simulate`].
 */
void sc_trajectory_free(struct ScTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCALED_CONSENSUS_H */
