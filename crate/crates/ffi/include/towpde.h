#ifndef TOWPDE_H
#define TOWPDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TowStatus {
  TOW_STATUS_OK = 0,
  TOW_STATUS_NULL_ARGUMENT = 1,
  TOW_STATUS_CONFIG = 2,
  TOW_STATUS_NUMERIC = 3,
  TOW_STATUS_CONVERGENCE = 4,
  TOW_STATUS_IO = 5,
  TOW_STATUS_CONTRACT = 6,
  TOW_STATUS_PANIC = 7,
} TowStatus;

/*
 A parsed and validated run configuration.
 */
typedef struct TowProblem TowProblem;

/*
 A solved value pair together with its grid and data.
 */
typedef struct TowSolution TowSolution;

/*
 Result of a Monte Carlo value estimate.
 */
typedef struct TowEstimate {
  double mean;
  double stderr;
  uint64_t n;
  double mean_steps;
} TowEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread. The pointer stays valid
 until the next failing call on the same thread.
 */
const char *tow_last_error(void);

/*
 `κ = 1/(N+2)`.
 */
double tow_kappa(uint32_t dim);

/*
 Parses a TOML configuration. Relative table paths resolve against the
 current directory.

 # Safety
 `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TowStatus tow_problem_from_toml(const char *toml, struct TowProblem **out);

/*
 Loads a TOML configuration file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TowStatus tow_problem_from_file(const char *path, struct TowProblem **out);

/*
 # Safety
 `problem` must come from `tow_problem_from_*` (or be null).
 */
void tow_problem_free(struct TowProblem *problem);

/*
 Solves the DPP of `problem`.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum TowStatus tow_solve(const struct TowProblem *problem, struct TowSolution **out);

/*
 # Safety
 `solution` must come from `tow_solve` (or be null).
 */
void tow_solution_free(struct TowSolution *solution);

/*
 Spatial dimension, or 0 for a null handle.

 # Safety
 `solution` must be a live handle or null.
 */
uintptr_t tow_solution_dim(const struct TowSolution *solution);

/*
 Number of time levels `M + 1`, or 0 for a null handle.

 # Safety
 `solution` must be a live handle or null.
 */
uintptr_t tow_solution_level_count(const struct TowSolution *solution);

/*
 Number of grid nodes (interior first, then collar), or 0 for null.

 # Safety
 `solution` must be a live handle or null.
 */
uintptr_t tow_solution_node_count(const struct TowSolution *solution);

/*
 Number of interior nodes, or 0 for null.

 # Safety
 `solution` must be a live handle or null.
 */
uintptr_t tow_solution_interior_count(const struct TowSolution *solution);

/*
 Copies the node coordinates (`node_count * dim` values, node-major).

 # Safety
 `buf` must hold `len` doubles.
 */
enum TowStatus tow_solution_coords(const struct TowSolution *solution, double *buf, uintptr_t len);

/*
 Copies the level times.

 # Safety
 `buf` must hold `len` doubles.
 */
enum TowStatus tow_solution_times(const struct TowSolution *solution, double *buf, uintptr_t len);

/*
 Copies `u` (board 1) or `v` (board 2) at `level` into `buf`.

 # Safety
 `buf` must hold `len` doubles.
 */
enum TowStatus tow_solution_field(const struct TowSolution *solution,
                                  uint8_t board,
                                  uintptr_t level,
                                  double *buf,
                                  uintptr_t len);

/*
 Value of `u` (board 1) or `v` (board 2) at an arbitrary `(x, t)`.

 # Safety
 `x` must hold `dim` doubles and `out` be a valid pointer.
 */
enum TowStatus tow_solution_eval(const struct TowSolution *solution,
                                 uint8_t board,
                                 const double *x,
                                 uintptr_t dim,
                                 double t,
                                 double *out);

/*
 Writes the binary field pack.

 # Safety
 `path` must be a NUL-terminated string.
 */
enum TowStatus tow_solution_write_pack(const struct TowSolution *solution, const char *path);

/*
 Monte Carlo value of the game from `(x, t, board)` when both players
 play greedily on the solved field (`samples` extra ball points each).

 # Safety
 `x` must hold `dim` doubles and `out` be a valid pointer.
 */
enum TowStatus tow_estimate_greedy(const struct TowSolution *solution,
                                   const double *x,
                                   uintptr_t dim,
                                   double t,
                                   uint8_t board,
                                   uint64_t n,
                                   uint32_t samples,
                                   uint64_t seed,
                                   struct TowEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOWPDE_H */
