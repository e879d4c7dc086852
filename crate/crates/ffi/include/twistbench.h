#ifndef TWISTBENCH_H
#define TWISTBENCH_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_INVALID_UTF8 = 2,
  // Malformed JSON or an invalid parameter.
  TB_STATUS_CONFIG = 3,
  // A time outside the open interval.
  TB_STATUS_DOMAIN = 4,
  TB_STATUS_NOT_SPACELIKE = 5,
  TB_STATUS_PRECONDITION = 6,
  // Buffer length does not match the node count.
  TB_STATUS_BAD_LENGTH = 7,
  TB_STATUS_IO = 8,
  TB_STATUS_PANIC = 9,
} TbStatus;

// Outcome tag of a solve.
typedef enum TbOutcome {
  TB_OUTCOME_CONVERGED = 0,
  TB_OUTCOME_NON_EXISTENCE_CERTIFICATE = 1,
  TB_OUTCOME_NOT_CONVERGED = 2,
} TbOutcome;

// A spacetime: interval, fiber grid and twisting function.
typedef struct TbModel TbModel;

// A finished solve with its iterate log.
typedef struct TbSolve TbSolve;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tb_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *tb_last_error_message(void);

// Builds a model from a JSON spacetime description
// (`{"interval": [a, b], "fiber": {...}, "twist": {...}}`).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum TbStatus tb_model_from_json(const char *json, struct TbModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from `tb_model_from_json` and not be used afterwards.
void tb_model_free(struct TbModel *model);

// Number of fiber grid nodes, the length of every field buffer.
//
// # Safety
// Pointers must be valid.
enum TbStatus tb_model_node_count(const struct TbModel *model, size_t *out);

// Fiber dimension.
//
// # Safety
// Pointers must be valid.
enum TbStatus tb_model_dim(const struct TbModel *model, size_t *out);

// Mean curvature of the graph `t = u(x)`, node values in row-major order.
//
// # Safety
// `u` and `out` must hold `len` and `out_len` doubles.
enum TbStatus tb_mean_curvature(const struct TbModel *model,
                                const double *u,
                                size_t len,
                                double *out,
                                size_t out_len);

// Largest causal margin `|du|_g / f` over the grid; below 1 means spacelike.
// Succeeds for non-spacelike graphs too.
//
// # Safety
// `u` must hold `len` doubles and `out` be valid.
enum TbStatus tb_spacelike_margin(const struct TbModel *model,
                                  const double *u,
                                  size_t len,
                                  double *out);

// Solves for a maximal, CMC or generalized-target graph from `u0`.
// `solve_json` may be NULL for the defaults. A certificate or an
// unconverged run still returns `TB_STATUS_OK`; inspect the outcome.
//
// # Safety
// `u0` must hold `len` doubles; `solve_json` is NULL or NUL-terminated.
enum TbStatus tb_solve(const struct TbModel *model,
                       const char *solve_json,
                       const double *u0,
                       size_t len,
                       struct TbSolve **out);

// Releases a solve. NULL is ignored.
//
// # Safety
// `s` must come from `tb_solve` and not be used afterwards.
void tb_solve_free(struct TbSolve *s);

// # Safety
// Pointers must be valid.
enum TbStatus tb_solve_outcome(const struct TbSolve *s, enum TbOutcome *out);

// Final (or best) residual `‖H − target‖∞`; NaN for a certificate.
//
// # Safety
// Pointers must be valid.
enum TbStatus tb_solve_residual(const struct TbSolve *s, double *out);

// Copies the converged (or best) graph. Fails with `TB_STATUS_PRECONDITION`
// for a certificate, which carries no graph.
//
// # Safety
// `out` must hold `len` doubles.
enum TbStatus tb_solve_copy_solution(const struct TbSolve *s, double *out, size_t len);

// Outcome as JSON, including certificate details. Release the string
// with `tb_string_free`.
//
// # Safety
// Pointers must be valid.
enum TbStatus tb_solve_outcome_json(const struct TbSolve *s, char **out);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void tb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWISTBENCH_H */
