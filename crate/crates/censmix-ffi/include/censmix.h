#ifndef CENSMIX_H
#define CENSMIX_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every interface call.
 */
typedef enum {
  CENSMIX_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  CENSMIX_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  CENSMIX_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The dataset file could not be read.
   */
  CENSMIX_STATUS_IO = 3,
  /**
   * The dataset file could not be parsed.
   */
  CENSMIX_STATUS_PARSE = 4,
  /**
   * Model fitting failed.
   */
  CENSMIX_STATUS_FIT = 5,
  /**
   * An internal invariant failed; the message has details.
   */
  CENSMIX_STATUS_INTERNAL = 6,
} CensmixStatus;

/**
 * A loaded dataset (opaque).
 */
typedef struct CensmixDataset CensmixDataset;

/**
 * A completed fit (opaque).
 */
typedef struct CensmixFit CensmixFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *censmix_last_error(void);

/**
 * Read a dataset file (header `y,cens,c1,c2,x1..,r1..`) into a new handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
CensmixStatus censmix_dataset_read(const char *path, CensmixDataset **out);

/**
 * Number of observations in the dataset.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
CensmixStatus censmix_dataset_len(const CensmixDataset *ds, uintptr_t *out);

/**
 * Release a dataset handle; a null pointer is ignored.
 *
 * # Safety
 * `ds` must be a pointer returned by `censmix_dataset_read`, released at
 * most once.
 */
void censmix_dataset_free(CensmixDataset *ds);

/**
 * Fit a mixture of linear experts.
 *
 * `family` is one of "n", "t", "sl", "cn"; `tie_nu` is 0 or 1; `max_iter`
 * and `tol` of 0 select the defaults (1000 and 1e-5).
 *
 * # Safety
 * `ds` must be a live dataset handle, `family` a valid NUL-terminated
 * string, and `out` a valid pointer.
 */
CensmixStatus censmix_fit_run(const CensmixDataset *ds,
                              uintptr_t components,
                              const char *family,
                              int32_t tie_nu,
                              uint64_t seed,
                              uintptr_t max_iter,
                              double tol,
                              CensmixFit **out);

/**
 * Release a fit handle; a null pointer is ignored.
 *
 * # Safety
 * `fit` must be a pointer returned by `censmix_fit_run`, released at most
 * once.
 */
void censmix_fit_free(CensmixFit *fit);

/**
 * Maximized observed-data log-likelihood.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` a valid pointer.
 */
CensmixStatus censmix_fit_loglik(const CensmixFit *fit, double *out);

/**
 * Akaike information criterion of the fit.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` a valid pointer.
 */
CensmixStatus censmix_fit_aic(const CensmixFit *fit, double *out);

/**
 * Bayesian information criterion of the fit.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` a valid pointer.
 */
CensmixStatus censmix_fit_bic(const CensmixFit *fit, double *out);

/**
 * Whether the stopping rule was met (1) or iteration limits ended the fit
 * (0).
 *
 * # Safety
 * `fit` must be a live fit handle and `out` a valid pointer.
 */
CensmixStatus censmix_fit_converged(const CensmixFit *fit, int32_t *out);

/**
 * Number of components, expert coefficients, and gating coefficients.
 *
 * # Safety
 * `fit` must be a live fit handle; each non-null output pointer must be
 * valid.
 */
CensmixStatus censmix_fit_shape(const CensmixFit *fit, uintptr_t *g, uintptr_t *p, uintptr_t *q);

/**
 * Expert coefficients of one component (0-based), written into `out`
 * (capacity `cap >= p`).
 *
 * # Safety
 * `fit` must be a live fit handle and `out` must point to at least `cap`
 * doubles.
 */
CensmixStatus censmix_fit_beta(const CensmixFit *fit,
                               uintptr_t component,
                               double *out,
                               uintptr_t cap);

/**
 * Scale parameter of one component (0-based).
 *
 * # Safety
 * `fit` must be a live fit handle and `out` a valid pointer.
 */
CensmixStatus censmix_fit_sigma2(const CensmixFit *fit, uintptr_t component, double *out);

/**
 * Gating coefficients of one non-reference component (0-based index below
 * g - 1), written into `out` (capacity `cap >= q`).
 *
 * # Safety
 * `fit` must be a live fit handle and `out` must point to at least `cap`
 * doubles.
 */
CensmixStatus censmix_fit_tau(const CensmixFit *fit,
                              uintptr_t component,
                              double *out,
                              uintptr_t cap);

/**
 * Maximum-responsibility component labels (0-based), one per observation,
 * written into `out` (capacity `cap >= n`).
 *
 * # Safety
 * `fit` must be a live fit handle and `out` must point to at least `cap`
 * entries.
 */
CensmixStatus censmix_fit_labels(const CensmixFit *fit, uintptr_t *out, uintptr_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENSMIX_H */
