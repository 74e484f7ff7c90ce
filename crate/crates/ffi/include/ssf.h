#ifndef SSF_H
#define SSF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SsfStatus {
  SSF_STATUS_OK = 0,
  SSF_STATUS_NULL_POINTER = 1,
  SSF_STATUS_INVALID_UTF8 = 2,
  SSF_STATUS_PARSE = 3,
  SSF_STATUS_VALIDATION = 4,
  SSF_STATUS_NOT_HERMITIAN = 5,
  SSF_STATUS_NUMERICAL = 6,
  SSF_STATUS_CONSISTENCY = 7,
  SSF_STATUS_IO = 8,
  SSF_STATUS_PANIC = 9,
} SsfStatus;

// Opaque spectral shift function.
typedef struct SsfEta SsfEta;

// Opaque problem instance.
typedef struct SsfInstance SsfInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL.  The pointer
// stays valid until the next failing call on the same thread.
const char *ssf_last_error_message(void);

// Frees a string returned by this library.  NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void ssf_string_free(char *s);

// Parses an instance document (same schema as the CLI).
//
// # Safety
// `json` must be a NUL-terminated string, `out` a valid pointer.
enum SsfStatus ssf_instance_from_json(const char *json, struct SsfInstance **out);

// Builds an instance from row-major planes; either imaginary plane may be
// NULL.  The function list is empty.
//
// # Safety
// Non-null planes must hold `dim * dim` doubles; `out` must be valid.
enum SsfStatus ssf_instance_from_matrices(size_t dim,
                                          const double *h_re,
                                          const double *h_im,
                                          const double *v_re,
                                          const double *v_im,
                                          size_t n,
                                          struct SsfInstance **out);

// Seeded random instance.
//
// # Safety
// `out` must be a valid pointer.
enum SsfStatus ssf_instance_generate(size_t dim,
                                     double spread,
                                     double schatten_budget,
                                     size_t n,
                                     uint64_t seed,
                                     struct SsfInstance **out);

// Serializes an instance; free the result with [`ssf_string_free`].
//
// # Safety
// `inst` must be a live handle, `out` a valid pointer.
enum SsfStatus ssf_instance_to_json(const struct SsfInstance *inst, char **out);

// Matrix dimension, 0 for NULL.
//
// # Safety
// `inst` must be NULL or a live handle.
size_t ssf_instance_dim(const struct SsfInstance *inst);

// # Safety
// `inst` must be NULL or a handle not yet freed.
void ssf_instance_free(struct SsfInstance *inst);

// Full compute record as JSON; `all_pass` (nullable) receives 1 when every
// check passed.
//
// # Safety
// `inst` must be a live handle, `out` a valid pointer.
enum SsfStatus ssf_compute_record_json(const struct SsfInstance *inst,
                                       char **out,
                                       int32_t *all_pass);

// `η_n` for the instance; `n = 0` uses the instance order.
//
// # Safety
// `inst` must be a live handle, `out` a valid pointer.
enum SsfStatus ssf_eta_compute(const struct SsfInstance *inst, size_t n, struct SsfEta **out);

// Order `n`, 0 for NULL.
//
// # Safety
// `eta` must be NULL or a live handle.
size_t ssf_eta_order(const struct SsfEta *eta);

// Left limit `η_n(t-)`; `right != 0` gives `η_n(t+)`.
//
// # Safety
// `eta` must be a live handle, `out` a valid pointer.
enum SsfStatus ssf_eta_eval(const struct SsfEta *eta, double t, int32_t right, double *out);

// `∫ η_n` and `‖η_n‖_1`; either output may be NULL.
//
// # Safety
// `eta` must be a live handle.
enum SsfStatus ssf_eta_norms(const struct SsfEta *eta, double *integral, double *l1_norm);

// Copies up to `cap` breakpoints into `buf` (which may be NULL when `cap`
// is 0) and stores the total count in `count`.
//
// # Safety
// `buf` must hold `cap` doubles; `count` must be valid.
enum SsfStatus ssf_eta_breakpoints(const struct SsfEta *eta,
                                   double *buf,
                                   size_t cap,
                                   size_t *count);

// Breakpoints, per-interval coefficients and jumps as JSON.
//
// # Safety
// `eta` must be a live handle, `out` a valid pointer.
enum SsfStatus ssf_eta_to_json(const struct SsfEta *eta, char **out);

// # Safety
// `eta` must be NULL or a handle not yet freed.
void ssf_eta_free(struct SsfEta *eta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSF_H */
