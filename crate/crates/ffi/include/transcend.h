#ifndef TRANSCEND_H
#define TRANSCEND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TRANSCEND_TARGET_EXP2 0

#define TRANSCEND_TARGET_LOG2 1

#define TRANSCEND_TARGET_ERF 2

#define TRANSCEND_TARGET_AIRY 3

#define TRANSCEND_MODE_REAL64 0

#define TRANSCEND_MODE_FLOAT32 1

#define TRANSCEND_PROOF_PROVEN 0

#define TRANSCEND_PROOF_BOUND_EXCEEDED 1

#define TRANSCEND_PROOF_POSSIBLE_POLE 2

#define TRANSCEND_PROOF_LIMITS 3

// Result code of every fallible call.
typedef enum TranscendStatus {
  TRANSCEND_STATUS_OK = 0,
  TRANSCEND_STATUS_NULL_POINTER = 1,
  TRANSCEND_STATUS_INVALID_ARGUMENT = 2,
  TRANSCEND_STATUS_PARSE = 3,
  TRANSCEND_STATUS_INVALID_PROGRAM = 4,
  TRANSCEND_STATUS_DOMAIN = 5,
  TRANSCEND_STATUS_NUMERICAL = 6,
  TRANSCEND_STATUS_IO = 7,
  TRANSCEND_STATUS_PANIC = 8,
} TranscendStatus;

// Opaque program handle.
typedef struct TranscendProgram TranscendProgram;

// Outcome of `transcend_prove_bound`.
typedef struct TranscendProof {
  // One of the `TRANSCEND_PROOF_*` constants.
  int32_t outcome;
  uint64_t subintervals;
  uint32_t max_depth;
  // Largest local bound over the proven leaves.
  double max_eta;
  // Failing subinterval when `outcome` is not proven.
  double witness_lo;
  double witness_hi;
  double witness_eta;
} TranscendProof;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or NULL. Owned by the
// library; valid until the next failing call.
const char *transcend_last_error(void);

// Library version as a static NUL-terminated string.
const char *transcend_version(void);

// Parses program text (`def f(x):` form or bare statements).
//
// # Safety
// `text` must be NUL-terminated; `out` must be writable.
enum TranscendStatus transcend_program_parse(const char *text, struct TranscendProgram **out);

// Releases a program. NULL is ignored.
//
// # Safety
// `p` must come from `transcend_program_parse` and not be used afterwards.
void transcend_program_free(struct TranscendProgram *p);

// Number of arithmetic operations, or 0 for NULL.
//
// # Safety
// `p` must be a live handle or NULL.
size_t transcend_program_operations(const struct TranscendProgram *p);

// Number of coefficients, or 0 for NULL.
//
// # Safety
// `p` must be a live handle or NULL.
size_t transcend_program_coefficients(const struct TranscendProgram *p);

// Canonical text of the program; free with `transcend_string_free`.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum TranscendStatus transcend_program_serialize(const struct TranscendProgram *p, char **out);

// # Safety
// `s` must come from this library, or be NULL.
void transcend_string_free(char *s);

// Evaluates the program at `n` inputs. Non-finite results propagate.
//
// # Safety
// `xs` and `out` must each hold `n` doubles.
enum TranscendStatus transcend_program_eval(const struct TranscendProgram *p,
                                            int32_t mode,
                                            const double *xs,
                                            size_t n,
                                            double *out);

// Maximum relative error (real mode) or ULP error (float mode) against
// `target` on an evenly spaced grid of `points` inputs.
//
// # Safety
// `out` must be writable.
enum TranscendStatus transcend_max_error(const struct TranscendProgram *p,
                                         int32_t target,
                                         int32_t mode,
                                         size_t points,
                                         double *out);

// Tries to prove |program/target - 1| <= epsilon on [lo, hi]. Passing NaN
// for both ends selects the target's default domain; 0 for `order`,
// `max_depth` or `max_leaves` selects the default. A completed attempt
// returns `Ok` whatever its outcome; the outcome is in `out`.
//
// # Safety
// `out` must be writable.
enum TranscendStatus transcend_prove_bound(const struct TranscendProgram *p,
                                           int32_t target,
                                           double lo,
                                           double hi,
                                           double epsilon,
                                           uint32_t order,
                                           uint32_t max_depth,
                                           uint64_t max_leaves,
                                           struct TranscendProof *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSCEND_H */
