#ifndef ROTVEM_H
#define ROTVEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum RvStatus {
  RvOk = 0,
  RvNullPointer = 1,
  RvInvalidArgument = 2,
  RvBadConfig = 3,
  RvRunFailed = 4,
  RvPanic = 5,
} RvStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct RvConfig RvConfig;

/**
 * Opaque run outcome.
 */
typedef struct RvOutcome RvOutcome;

/**
 * One convergence-table row; undefined orders are NaN.
 */
typedef struct RvRow {
  double h;
  double l2_err;
  double l2_order;
  double rot_err;
  double rot_order;
} RvRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *rv_last_error_message(void);

/**
 * Parses a config in the `key = value` file format.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum RvStatus rv_config_parse(const char *text, struct RvConfig **out);

/**
 * Creates the default config of a built-in example
 * (`circle`, `line_singular`, `double_circle`, `layers`).
 *
 * # Safety
 * `example` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum RvStatus rv_config_default(const char *example, struct RvConfig **out);

/**
 * Replaces the refinement levels.
 *
 * # Safety
 * `config` must come from a constructor; `levels` must point to `n` values.
 */
enum RvStatus rv_config_set_levels(struct RvConfig *config, const uint32_t *levels, uintptr_t n);

/**
 * Sets the reference level for the self-convergence examples.
 *
 * # Safety
 * `config` must come from a constructor.
 */
enum RvStatus rv_config_set_ref_level(struct RvConfig *config, uint32_t level);

/**
 * Sets the artifact output directory.
 *
 * # Safety
 * `config` must come from a constructor; `path` must be NUL-terminated.
 */
enum RvStatus rv_config_set_out_dir(struct RvConfig *config, const char *path);

/**
 * Serializes the config; the returned string must be freed with
 * [`rv_string_free`].
 *
 * # Safety
 * `config` must come from a constructor and `out` must be a valid pointer.
 */
enum RvStatus rv_config_serialize(const struct RvConfig *config, char **out);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from [`rv_config_serialize`] and not be freed twice.
 */
void rv_string_free(char *s);

/**
 * # Safety
 * `config` must come from a constructor and not be freed twice.
 */
void rv_config_free(struct RvConfig *config);

/**
 * Runs the experiment; artifacts are written under the config's output
 * directory and the convergence table is available through the handle.
 *
 * # Safety
 * `config` must come from a constructor and `out` must be a valid pointer.
 */
enum RvStatus rv_run(const struct RvConfig *config, struct RvOutcome **out);

/**
 * Number of convergence-table rows.
 *
 * # Safety
 * `outcome` must come from [`rv_run`].
 */
uintptr_t rv_outcome_rows(const struct RvOutcome *outcome);

/**
 * Copies one table row; undefined orders come out as NaN.
 *
 * # Safety
 * `outcome` must come from [`rv_run`] and `row` must be a valid pointer.
 */
enum RvStatus rv_outcome_row(const struct RvOutcome *outcome, uintptr_t index, struct RvRow *row);

/**
 * True when every level completed.
 *
 * # Safety
 * `outcome` must come from [`rv_run`].
 */
bool rv_outcome_all_ok(const struct RvOutcome *outcome);

/**
 * # Safety
 * `outcome` must come from [`rv_run`] and not be freed twice.
 */
void rv_outcome_free(struct RvOutcome *outcome);

/**
 * Shape-regularity threshold τ(θ).
 */
double rv_tau_theta(double theta, double kappa0, double kappa1);

/**
 * Error-constant bound ϱ(κ₀, κ₁).
 */
double rv_varrho(double kappa0, double kappa1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROTVEM_H */
