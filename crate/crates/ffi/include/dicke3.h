#ifndef DICKE3_H
#define DICKE3_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DICKE3_METHOD_EXACT 0

#define DICKE3_METHOD_RWA 1

#define DICKE3_METHOD_ZEROTH 2

#define DICKE3_METHOD_GRWA 3

typedef enum Dicke3Status {
  DICKE3_STATUS_OK = 0,
  DICKE3_STATUS_NULL_POINTER = 1,
  DICKE3_STATUS_INVALID_ARGUMENT = 2,
  DICKE3_STATUS_INVALID_DENSITY = 3,
  DICKE3_STATUS_SOLVER_FAILURE = 4,
  DICKE3_STATUS_BUFFER_TOO_SMALL = 5,
  DICKE3_STATUS_PANIC = 6,
} Dicke3Status;

/**
 * Opaque density-matrix handle (4×4 spin sector or 8×8 qubits).
 */
typedef struct Dicke3Density Dicke3Density;

/**
 * Opaque eigen-system handle.
 */
typedef struct Dicke3EigenSystem Dicke3EigenSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves one model. On success `*out` owns a new handle.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum Dicke3Status dicke3_solve(int32_t method,
                               double delta,
                               double omega,
                               double g,
                               size_t n_max,
                               struct Dicke3EigenSystem **out);

/**
 * Number of eigenvalues, or 0 for a null handle.
 *
 * # Safety
 * `es` must be null or a live handle from [`dicke3_solve`].
 */
size_t dicke3_eigensystem_len(const struct Dicke3EigenSystem *es);

/**
 * Copies the ascending energies into `buf`, which must hold at least
 * [`dicke3_eigensystem_len`] values.
 *
 * # Safety
 * `es` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum Dicke3Status dicke3_eigensystem_energies(const struct Dicke3EigenSystem *es,
                                              double *buf,
                                              size_t len);

/**
 * # Safety
 * `es` must be null or a handle from [`dicke3_solve`] not yet freed.
 */
void dicke3_eigensystem_free(struct Dicke3EigenSystem *es);

/**
 * Builds a density matrix from `dim * dim` row-major complex entries given
 * as interleaved `re, im` doubles (`2 * dim * dim` values). `dim` is 4 or 8.
 *
 * # Safety
 * `entries` must point to `2 * dim * dim` readable doubles and `out` to
 * writable storage for one pointer.
 */
enum Dicke3Status dicke3_density_new(size_t dim, const double *entries, struct Dicke3Density **out);

/**
 * # Safety
 * `rho` must be null or a handle from [`dicke3_density_new`] not yet freed.
 */
void dicke3_density_free(struct Dicke3Density *rho);

/**
 * GME estimate `E(ρ)` of an 8×8 state; `tol <= 0` selects the default.
 *
 * # Safety
 * `rho` must be a live handle and `out` a writable double.
 */
enum Dicke3Status dicke3_gme(const struct Dicke3Density *rho, double tol, double *out);

/**
 * Collective concurrence for a 4×4 state, or the A–B Wootters concurrence
 * for an 8×8 state.
 *
 * # Safety
 * `rho` must be a live handle and `out` a writable double.
 */
enum Dicke3Status dicke3_concurrence(const struct Dicke3Density *rho, double *out);

/**
 * Negativity of an 8×8 state for the transposed qubits in `mask`
 * (A = 4, B = 2, C = 1).
 *
 * # Safety
 * `rho` must be a live handle and `out` a writable double.
 */
enum Dicke3Status dicke3_negativity(const struct Dicke3Density *rho, uint8_t mask, double *out);

/**
 * Copies the last error of this thread, NUL-terminated and truncated to
 * `len` bytes. Returns the full message length plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dicke3_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dicke3_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DICKE3_H */
