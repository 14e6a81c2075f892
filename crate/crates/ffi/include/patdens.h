#ifndef PATDENS_H
#define PATDENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_INVALID_ARGUMENT = 1,
  PD_STATUS_INFEASIBLE_EXPONENT = 2,
  PD_STATUS_NEAR_BOUNDARY = 3,
  PD_STATUS_NON_CONVERGENCE = 4,
  PD_STATUS_IO = 5,
  PD_STATUS_NULL_POINTER = 6,
  PD_STATUS_BUFFER_TOO_SMALL = 7,
  PD_STATUS_PANIC = 8,
} PdStatus;

typedef enum PdDeckMode {
  PD_DECK_MODE_EXHAUSTIVE = 0,
  PD_DECK_MODE_ANNEAL = 1,
  PD_DECK_MODE_ASCENT = 2,
} PdDeckMode;

/**
 * Outcome of a deck optimization.
 */
typedef struct PdDeckResult PdDeckResult;

/**
 * A solved entropy-maximizing limit shape.
 */
typedef struct PdLimitShape PdLimitShape;

/**
 * A binary word.
 */
typedef struct PdWord PdWord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pd_version(void);

/**
 * Message of the last failure on this thread; empty if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pd_last_error(void);

/**
 * Parses a string of `'0'`/`'1'` characters.
 */
enum PdStatus pd_word_new(const char *bits, struct PdWord **out);

void pd_word_free(struct PdWord *word);

/**
 * Length of the word, 0 for a null handle.
 */
size_t pd_word_len(const struct PdWord *word);

enum PdStatus pd_word_to_string(const struct PdWord *word, char *buf, size_t cap, size_t *needed);

/**
 * Exact number of occurrences of `pattern` as a subsequence of `host`, as a
 * decimal string.
 */
enum PdStatus pd_count(const struct PdWord *pattern,
                       const struct PdWord *host,
                       char *buf,
                       size_t cap,
                       size_t *needed);

/**
 * Count divided by the number of position subsets of the pattern's length.
 */
enum PdStatus pd_density(const struct PdWord *pattern, const struct PdWord *host, double *out);

/**
 * Wasserstein-1 distance between the measures of two words.
 */
enum PdStatus pd_wasserstein(const struct PdWord *a, const struct PdWord *b, double *out);

/**
 * Tabulated constant `C` for `tau`; `PD_STATUS_INVALID_ARGUMENT` when none
 * is tabulated.
 */
enum PdStatus pd_c_closed_form(const struct PdWord *tau, double *out);

/**
 * Numeric constant `C` for `tau` by ascent on a grid of `grid` cells.
 */
enum PdStatus pd_c_numeric(const struct PdWord *tau, size_t grid, double *out);

/**
 * Solves for the entropy-maximizing density; `targets` reads like
 * `"rho1=0.5,rho110=0.3333"`.
 */
enum PdStatus pd_limit_shape_solve(const char *targets, size_t grid, struct PdLimitShape **out);

void pd_limit_shape_free(struct PdLimitShape *shape);

/**
 * Entropy of the shape, NaN for a null handle.
 */
double pd_limit_shape_entropy(const struct PdLimitShape *shape);

/**
 * Value of the gridded density at `x` in `[0, 1]`, NaN for a null handle.
 */
double pd_limit_shape_value_at(const struct PdLimitShape *shape, double x);

/**
 * Exponent polynomial coefficients `a_0, ..., a_k`. `*needed` receives `k + 1`.
 */
enum PdStatus pd_limit_shape_coeffs(const struct PdLimitShape *shape,
                                    double *buf,
                                    size_t cap,
                                    size_t *needed);

/**
 * Arranges `n` cards, `ones` of them 1, to maximize the density of
 * `pattern`. `initial` may be null.
 */
enum PdStatus pd_deck_optimize(size_t n,
                               size_t ones,
                               const struct PdWord *pattern,
                               enum PdDeckMode mode,
                               const struct PdWord *initial,
                               uint64_t seed,
                               struct PdDeckResult **out);

void pd_deck_result_free(struct PdDeckResult *result);

/**
 * Best arrangement, borrowed from `result` and valid until it is freed.
 */
const struct PdWord *pd_deck_result_best(const struct PdDeckResult *result);

/**
 * Density of the best arrangement, NaN for a null handle.
 */
double pd_deck_result_density(const struct PdDeckResult *result);

/**
 * Exact occurrence count of the best arrangement as a decimal string.
 */
enum PdStatus pd_deck_result_count(const struct PdDeckResult *result,
                                   char *buf,
                                   size_t cap,
                                   size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATDENS_H */
