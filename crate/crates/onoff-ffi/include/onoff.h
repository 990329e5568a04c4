#ifndef ONOFF_H
#define ONOFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Source labels (source 1 = A, source 2 = B).
 */
typedef enum {
  ONOFF_SOURCE_A = 0,
  ONOFF_SOURCE_B = 1,
} OnoffSource;

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  ONOFF_STATUS_OK = 0,
  ONOFF_STATUS_NULL_POINTER = 1,
  ONOFF_STATUS_PARSE_ERROR = 2,
  ONOFF_STATUS_NOT_STOCHASTIC = 3,
  ONOFF_STATUS_DEGENERATE_CONTEXT = 4,
  ONOFF_STATUS_IMPOSSIBLE_CONTEXT = 5,
  ONOFF_STATUS_INVALID_ARGUMENT = 6,
  ONOFF_STATUS_VERIFY_FAILED = 7,
  ONOFF_STATUS_INTERNAL_ERROR = 8,
} OnoffStatus;

/**
 * Opaque validated transition matrix handle.
 */
typedef struct OnoffMatrix OnoffMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses `"3/4 1/4 1/4 3/4"` or `"alpha=1/4"` into a validated handle.
 * On success writes the handle to `out`; free it with `onoff_matrix_free`.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
OnoffStatus onoff_matrix_parse(const char *text, OnoffMatrix **out);

/**
 * # Safety
 * `m` must be a handle returned by `onoff_matrix_parse`, not yet freed.
 * Passing null is a no-op.
 */
void onoff_matrix_free(OnoffMatrix *m);

/**
 * Pi-floor of both sources at the given gap.
 *
 * # Safety
 * `m`, `pi_a`, `pi_b` must be valid pointers.
 */
OnoffStatus onoff_pi_floor(const OnoffMatrix *m, uintptr_t gap, double *pi_a, double *pi_b);

/**
 * Optimal expected downloads per step, 2 - pi(A) - pi(B).
 *
 * # Safety
 * `m` and `out` must be valid pointers.
 */
OnoffStatus onoff_inverse_rate(const OnoffMatrix *m, uintptr_t gap, double *out);

/**
 * Encoder distribution over the query symbols {A}, {B}, {A,B} for request
 * `x` in context `(last_on, next)`. `probs` must hold 3 doubles.
 *
 * # Safety
 * `m` and `probs` must be valid pointers; `probs` points to 3 doubles.
 */
OnoffStatus onoff_encoder_probs(const OnoffMatrix *m,
                                uintptr_t gap,
                                OnoffSource x,
                                OnoffSource last_on,
                                OnoffSource next,
                                double *probs);

/**
 * Marginal query distribution at the given gap. `probs` must hold 3 doubles
 * in the order {A}, {B}, {A,B}.
 *
 * # Safety
 * `m` and `probs` must be valid pointers; `probs` points to 3 doubles.
 */
OnoffStatus onoff_query_marginal(const OnoffMatrix *m, uintptr_t gap, double *probs);

/**
 * Draws a query with caller-supplied uniform randomness in [0, 1); writes
 * the query bitmask (bit0 = A, bit1 = B) to `mask_out`.
 *
 * # Safety
 * `m` and `mask_out` must be valid pointers.
 */
OnoffStatus onoff_sample_query(const OnoffMatrix *m,
                               uintptr_t gap,
                               OnoffSource x,
                               OnoffSource last_on,
                               OnoffSource next,
                               double draw,
                               uint8_t *mask_out);

/**
 * Runs the exact verification sweep for a pattern (comma-separated
 * `ON`/`OFF` tokens) at every t in 0..=t_max. Writes 1 to `passed` iff
 * every decodability, privacy and cost check holds exactly.
 *
 * # Safety
 * `m`, `pattern`, `passed` must be valid pointers; `pattern` is a
 * NUL-terminated string.
 */
OnoffStatus onoff_verify(const OnoffMatrix *m, const char *pattern, uintptr_t t_max, int *passed);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ONOFF_H */
