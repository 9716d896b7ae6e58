#ifndef ENTROPY_DECAY_H
#define ENTROPY_DECAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_NULL_POINTER = 1,
  ED_STATUS_INVALID_UTF8 = 2,
  ED_STATUS_INVALID_INPUT = 3,
  ED_STATUS_INVALID_MODEL = 4,
  ED_STATUS_DIMENSION_MISMATCH = 5,
  ED_STATUS_DOMAIN = 6,
  ED_STATUS_NUMERICAL = 7,
  ED_STATUS_IO = 8,
  ED_STATUS_PANIC = 9,
} EdStatus;

// Constant selector for `ed_estimate`.
typedef enum EdConstant {
  ED_CONSTANT_GAP = 0,
  ED_CONSTANT_LSI = 1,
  ED_CONSTANT_MLSI = 2,
  ED_CONSTANT_KAPPA = 3,
} EdConstant;

// A model with its generator and stationary measure.
typedef struct EdModel EdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ed_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *ed_last_error_message(void);

// Builds a model from a string such as `poisson:lambda=1,n_max=60` or
// `linear_zr:a=1/1.2/1.4,particles=4`.
//
// # Safety
// `model` must be NULL or a NUL-terminated string; `out` must be NULL or
// writable.
enum EdStatus ed_model_new(const char *model, struct EdModel **out);

// Birth-death model with rates `birth[0..len]`, `death[0..len]`.
//
// # Safety
// `birth` and `death` must point to `len` doubles; `out` must be writable.
enum EdStatus ed_model_birth_death(const double *birth,
                                   const double *death,
                                   size_t len,
                                   struct EdModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from a constructor here and not be freed twice.
void ed_model_free(struct EdModel *model);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum EdStatus ed_model_n_states(const struct EdModel *model, size_t *out);

// Certified lower bound on the convexity constant. `certified` is set to
// false, and `kappa` to 0, when no sufficient condition applies.
//
// # Safety
// `model` must be a live handle; the outputs must be writable.
enum EdStatus ed_certified_kappa(const struct EdModel *model, double *kappa, bool *certified);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum EdStatus ed_spectral_gap(const struct EdModel *model, double *out);

// Numerical estimate of the constant selected by `kind` (an `EdConstant`);
// an upper bound except for the gap, which is exact. `restarts = 0` picks
// the default.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum EdStatus ed_estimate(const struct EdModel *model,
                          int32_t kind,
                          size_t restarts,
                          uint64_t seed,
                          double *out);

// `Ent_pi(f)` for a positive function given by state index.
//
// # Safety
// `f` must point to `len` doubles; `out` must be writable.
enum EdStatus ed_entropy(const struct EdModel *model, const double *f, size_t len, double *out);

// Second derivative of the entropy at `t = 0` for the three-site
// zero-range chain with rates `(c1, 1, 1)`.
//
// # Safety
// `out` must be writable.
enum EdStatus ed_counterexample(double c1, double epsilon, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTROPY_DECAY_H */
