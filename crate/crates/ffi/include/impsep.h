#ifndef IMPSEP_H
#define IMPSEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define IMPSEP_MODE_ERB_ONLY 0

#define IMPSEP_MODE_DF_ONLY 1

#define IMPSEP_MODE_TWO_STAGE 2

typedef enum ImpsepStatus {
  IMPSEP_STATUS_OK = 0,
  IMPSEP_STATUS_NULL_POINTER = 1,
  IMPSEP_STATUS_INVALID_INPUT = 2,
  IMPSEP_STATUS_INVALID_CONFIG = 3,
  IMPSEP_STATUS_SINGULAR_SYSTEM = 4,
  IMPSEP_STATUS_INCONSISTENT_STEMS = 5,
  IMPSEP_STATUS_UNDEFINED_REFERENCE = 6,
  IMPSEP_STATUS_IO = 7,
  IMPSEP_STATUS_PANIC = 8,
} ImpsepStatus;

/**
 * Opaque configuration shared by the separation and loss calls.
 */
typedef struct ImpsepSeparator ImpsepSeparator;

/**
 * Weighted loss terms; `total` is their sum.
 */
typedef struct ImpsepLossBreakdown {
  double impulsive;
  double stationary;
  double mixture;
  double total;
} ImpsepLossBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *impsep_version(void);

uint32_t impsep_schema_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *impsep_last_error_message(void);

/**
 * Creates a separator from a TOML configuration, or from defaults when
 * `config_toml` is NULL. Free with `impsep_separator_free`.
 *
 * # Safety
 * `config_toml` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum ImpsepStatus impsep_separator_new(const char *config_toml, struct ImpsepSeparator **out);

/**
 * # Safety
 * `sep` must be NULL or a pointer returned by `impsep_separator_new` that
 * has not been freed.
 */
void impsep_separator_free(struct ImpsepSeparator *sep);

/**
 * Median-filtering harmonic/percussive split using the separator's HPSS
 * and STFT settings.
 *
 * # Safety
 * `sep` must be a live separator; `mixture`, `out_impulsive` and
 * `out_stationary` must each point to `len` doubles.
 */
enum ImpsepStatus impsep_separate_hpss(const struct ImpsepSeparator *sep,
                                       const double *mixture,
                                       size_t len,
                                       uint32_t sample_rate,
                                       double *out_impulsive,
                                       double *out_stationary);

/**
 * Wavelet-threshold impulse extraction.
 *
 * # Safety
 * As for `impsep_separate_hpss`.
 */
enum ImpsepStatus impsep_separate_wavelet(const struct ImpsepSeparator *sep,
                                          const double *mixture,
                                          size_t len,
                                          uint32_t sample_rate,
                                          double *out_impulsive,
                                          double *out_stationary);

/**
 * Two-stage filtering with gains and filters fitted to the given true
 * stems. `mode` is one of the `IMPSEP_MODE_*` constants.
 *
 * # Safety
 * As for `impsep_separate_hpss`; `impulsive_ref` and `stationary_ref` must
 * also point to `len` doubles.
 */
enum ImpsepStatus impsep_separate_oracle(const struct ImpsepSeparator *sep,
                                         uint32_t mode,
                                         const double *mixture,
                                         const double *impulsive_ref,
                                         const double *stationary_ref,
                                         size_t len,
                                         uint32_t sample_rate,
                                         double *out_impulsive,
                                         double *out_stationary);

/**
 * Scale-invariant SDR of `est` against `reference`, in dB.
 *
 * # Safety
 * `est` and `reference` must point to `len` doubles; `out_db` must be
 * valid.
 */
enum ImpsepStatus impsep_si_sdr(const double *est,
                                const double *reference,
                                size_t len,
                                double *out_db);

/**
 * Weighted spectral loss of a pair of estimates, with the separator's
 * loss settings.
 *
 * # Safety
 * All signal pointers must point to `len` doubles; `sep` must be live and
 * `out` valid.
 */
enum ImpsepStatus impsep_loss_total(const struct ImpsepSeparator *sep,
                                    const double *est_impulsive,
                                    const double *est_stationary,
                                    const double *ref_impulsive,
                                    const double *ref_stationary,
                                    const double *mixture,
                                    size_t len,
                                    uint32_t sample_rate,
                                    struct ImpsepLossBreakdown *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMPSEP_H */
