#ifndef KAHLERLAB_H
#define KAHLERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The tens digit of a library error is its CLI exit code;
 * `kl_status_exit_code` maps every status, including the 9x ones.
 */
typedef enum KlStatus {
  KL_STATUS_OK = 0,
  KL_STATUS_USAGE = 10,
  KL_STATUS_CONFIG = 11,
  KL_STATUS_IO = 12,
  KL_STATUS_DATA = 13,
  KL_STATUS_DOMAIN = 20,
  KL_STATUS_PRECONDITION = 21,
  KL_STATUS_NOT_KAHLER = 22,
  KL_STATUS_BRANCH_UNDEFINED = 23,
  KL_STATUS_NO_CONVERGENCE = 30,
  KL_STATUS_CONE_BREACH = 40,
  KL_STATUS_ELLIPTICITY_LOST = 41,
  KL_STATUS_NULL_POINTER = 90,
  KL_STATUS_INVALID_UTF8 = 91,
  KL_STATUS_PANIC = 99,
} KlStatus;

/**
 * Parsed configuration document handle.
 */
typedef struct KlConfig KlConfig;

/**
 * Hermitian matrix handle.
 */
typedef struct KlHermitian KlHermitian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *kl_version(void);

/**
 * Message of the last failed call on this thread, or NULL if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *kl_last_error_message(void);

/**
 * CLI exit code (0..=4) for a status.
 */
int32_t kl_status_exit_code(enum KlStatus status);

/**
 * Builds a `dim x dim` Hermitian matrix from row-major real and imaginary
 * parts. `im` may be NULL for a real symmetric matrix.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim * dim` doubles; `out`
 * must be writable.
 */
enum KlStatus kl_hermitian_new(size_t dim,
                               const double *re,
                               const double *im,
                               struct KlHermitian **out);

/**
 * Releases a matrix handle. NULL is ignored.
 *
 * # Safety
 * `m` must come from `kl_hermitian_new` and not be freed twice.
 */
void kl_hermitian_free(struct KlHermitian *m);

/**
 * Matrix dimension, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t kl_hermitian_dim(const struct KlHermitian *m);

/**
 * Roots of `det(omega - lambda chi) = 0`, ascending, into `out[0..dim]`.
 *
 * # Safety
 * Handles must be live; `out` must hold `len` doubles.
 */
enum KlStatus kl_relative_spectrum(const struct KlHermitian *chi,
                                   const struct KlHermitian *omega,
                                   double *out,
                                   size_t len);

/**
 * `c - P(lambda)` for the spectrum of `chi` relative to `omega`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum KlStatus kl_j_cone_margin(const struct KlHermitian *chi,
                               const struct KlHermitian *omega,
                               double c,
                               double *out);

/**
 * `theta0 - P_arctan(lambda)` for the spectrum of `chi` relative to `omega`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum KlStatus kl_dhym_cone_margin(const struct KlHermitian *chi,
                                  const struct KlHermitian *omega,
                                  double theta0,
                                  double *out);

/**
 * Slope margin of one subvariety; `a` holds `p + 1` intersection numbers.
 *
 * # Safety
 * `a` must point to `len` doubles; `out` must be writable.
 */
enum KlStatus kl_slope_margin(size_t p,
                              size_t n,
                              const double *a,
                              size_t len,
                              double c,
                              double epsilon,
                              double *out);

/**
 * Parses a JSON configuration document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum KlStatus kl_config_from_json(const char *json, struct KlConfig **out);

/**
 * Releases a config handle. NULL is ignored.
 *
 * # Safety
 * `cfg` must come from `kl_config_from_json` and not be freed twice.
 */
void kl_config_free(struct KlConfig *cfg);

/**
 * Runs a CLI command (`"solve-j"`, `"check-stability"`, ...) and writes its
 * reports into `out_dir`. `cfg` may be NULL for `"verify-lemmas"`.
 *
 * # Safety
 * Strings must be NUL-terminated; `cfg` must be NULL or a live handle.
 */
enum KlStatus kl_run(const struct KlConfig *cfg,
                     const char *command,
                     const char *out_dir,
                     uint64_t seed,
                     size_t trials);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KAHLERLAB_H */
