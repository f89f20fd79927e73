#ifndef COHERE_H
#define COHERE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Ok` is zero.
 */
typedef enum CohereStatus {
  COHERE_STATUS_OK = 0,
  COHERE_STATUS_NULL_POINTER = 1,
  COHERE_STATUS_INVALID_INPUT = 2,
  COHERE_STATUS_DIMENSION_CAP = 3,
  COHERE_STATUS_SOLVER = 4,
  COHERE_STATUS_NO_ADMISSIBLE_PAIR = 5,
  COHERE_STATUS_PANIC = 6,
} CohereStatus;

/**
 * Opaque density matrix.
 */
typedef struct CohereState CohereState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a state from `dim * dim` real and imaginary parts in row-major
 * order. `im` may be null for a real matrix.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim * dim` doubles and `out`
 * must be writable.
 */
enum CohereStatus cohere_state_new(size_t dim,
                                   const double *re,
                                   const double *im,
                                   struct CohereState **out);

/**
 * Builds a state from the JSON file format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` must be writable.
 */
enum CohereStatus cohere_state_from_json(const char *json, struct CohereState **out);

/**
 * Releases a state. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void cohere_state_free(struct CohereState *s);

/**
 * Dimension of the state, or 0 for null.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t cohere_state_dim(const struct CohereState *s);

/**
 * Maximal coherence.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_eta(const struct CohereState *s, double *out);

/**
 * Block-partition monotone `Q` in bits.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_q(const struct CohereState *s, double *out);

/**
 * Relative entropy of coherence in bits.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_rel_entropy_coherence(const struct CohereState *s, double *out);

/**
 * `mu_k` in bits.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_mu_k(const struct CohereState *s, size_t k, double *out);

/**
 * SIO fidelity of distilling one coherence bit from `copies` copies.
 * `sdp_cap` bounds the program dimension; 0 selects the default.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_fidelity_sio(const struct CohereState *s,
                                      size_t copies,
                                      size_t sdp_cap,
                                      double *out);

/**
 * MIO fidelity of distilling one coherence bit from one copy.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_fidelity_mio(const struct CohereState *s, size_t sdp_cap, double *out);

/**
 * Limit of the SIO fidelity as the number of copies grows.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum CohereStatus cohere_asymptotic_fidelity(const struct CohereState *s, double *out);

/**
 * Analytic lower and upper bounds on the `n`-copy SIO fidelity.
 *
 * # Safety
 * `s` must be a live handle and `lower`, `upper` writable.
 */
enum CohereStatus cohere_multicopy_bounds(const struct CohereState *s,
                                          size_t n,
                                          double *lower,
                                          double *upper);

/**
 * Checks a channel in the JSON file format. Writes 1 to `valid` for a
 * strictly incoherent channel and 0 otherwise; the reason is then
 * available from [`cohere_last_error`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `valid` writable.
 */
enum CohereStatus cohere_validate_sio_json(const char *json, double tol, int *valid);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cohere_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cohere_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHERE_H */
