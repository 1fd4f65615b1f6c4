#ifndef CCSHAP_H
#define CCSHAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define CCS_OK 0

/**
 * A computation failed (fitting, sampling, numerical preconditions).
 */
#define CCS_ERR_COMPUTATION 1

/**
 * The input was malformed (parse errors, unknown names, bad arguments).
 */
#define CCS_ERR_INVALID_INPUT 2

/**
 * A required pointer argument was null.
 */
#define CCS_ERR_NULL_POINTER 3

/**
 * Attribution with all contexts treated observationally.
 */
#define CCS_METHOD_SHAPLEY 0

/**
 * Attribution with contexts entering through interventions.
 */
#define CCS_METHOD_CC_SHAPLEY 1

/**
 * An opaque structural causal model handle. Create with
 * `ccs_scm_parse`, destroy with `ccs_scm_free`.
 */
typedef struct CcsScm CcsScm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the most recent error on this thread, or an empty
 * string. The pointer stays valid until the next failing call on the
 * same thread; do not free it.
 */
const char *ccs_last_error(void);

/**
 * Parse a TOML model declaration into a model handle. Returns null on
 * failure (consult `ccs_last_error`).
 *
 * # Safety
 * `text` must be a valid, NUL-terminated C string.
 */
struct CcsScm *ccs_scm_parse(const char *text);

/**
 * Destroy a model handle. Null is a no-op.
 *
 * # Safety
 * `scm` must be a handle returned by `ccs_scm_parse` that has not been
 * freed already.
 */
void ccs_scm_free(struct CcsScm *scm);

/**
 * Number of nodes in the model's graph, or -1 on a null handle.
 *
 * # Safety
 * `scm` must be a live handle from `ccs_scm_parse` or null.
 */
int32_t ccs_scm_node_count(const struct CcsScm *scm);

/**
 * Sample `n_rows` observational rows and write them as CSV to `path`.
 *
 * # Safety
 * `scm` must be a live handle; `path` a valid NUL-terminated C string.
 */
int32_t ccs_scm_sample_csv(const struct CcsScm *scm,
                           uint64_t n_rows,
                           uint64_t seed,
                           const char *path);

/**
 * Compute attributions and write `attributions.csv`, `contexts.csv`, and
 * `plan.txt` into the directory `out_dir` (created if missing).
 *
 * `method` is `CCS_METHOD_SHAPLEY` or `CCS_METHOD_CC_SHAPLEY`;
 * `estimator` is `"linear"`, `"cpt"`, or `"binned"`. `n_eval = 0` writes
 * headers-only files.
 *
 * # Safety
 * `scm` must be a live handle; `estimator` and `out_dir` valid
 * NUL-terminated C strings.
 */
int32_t ccs_attribute(const struct CcsScm *scm,
                      int32_t method,
                      const char *estimator,
                      uint64_t n_fit,
                      uint64_t n_eval,
                      uint64_t seed,
                      const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCSHAP_H */
