#ifndef BRWLAB_H
#define BRWLAB_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BrwStatus {
  BRW_STATUS_OK = 0,
  BRW_STATUS_NULL_POINTER = 1,
  BRW_STATUS_INVALID_UTF8 = 2,
  BRW_STATUS_INVALID_CONFIG = 3,
  BRW_STATUS_CONDITIONS_FAILED = 4,
  BRW_STATUS_SIMULATION = 5,
  BRW_STATUS_IO = 6,
  BRW_STATUS_INVALID_ARGUMENT = 7,
  BRW_STATUS_BUFFER_TOO_SMALL = 8,
  BRW_STATUS_PANIC = 9,
} BrwStatus;

/**
 * Experiment configuration handle.
 */
typedef struct BrwConfig BrwConfig;

/**
 * Run report handle.
 */
typedef struct BrwReport BrwReport;

typedef struct BrwCounts {
  uint64_t replicates;
  uint64_t extinct;
  uint64_t capped;
  uint64_t used;
} BrwCounts;

typedef struct BrwCalibration {
  double theta;
  double spacing;
  double m_theta;
  double residual;
  double kappa;
} BrwCalibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty after a success).
 * Valid until the next call on the same thread.
 */
const char *brw_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *brw_version(void);

/**
 * Parses a TOML config document.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum BrwStatus brw_config_from_toml(const char *toml, struct BrwConfig **out);

/**
 * Config of a builtin scenario.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum BrwStatus brw_config_builtin(const char *name, struct BrwConfig **out);

/**
 * # Safety
 * `config` must come from a `brw_config_*` constructor (or be null).
 */
void brw_config_free(struct BrwConfig *config);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum BrwStatus brw_config_set_seed(struct BrwConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum BrwStatus brw_config_set_replicates(struct BrwConfig *config, uint64_t replicates);

/**
 * Output directory used when a run writes artifacts.
 *
 * # Safety
 * `config` must be a live config handle and `dir` a nul-terminated string.
 */
enum BrwStatus brw_config_set_output_dir(struct BrwConfig *config, const char *dir);

/**
 * Writes the 64 hex digits of the config digest and a nul into `buf`.
 *
 * # Safety
 * `config` must be a live handle and `buf` must hold `len` bytes.
 */
enum BrwStatus brw_config_digest(const struct BrwConfig *config, char *buf, size_t len);

/**
 * Contraction constant `kappa = m(alpha theta) / m(theta)^alpha` of the config's law.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_config_kappa(const struct BrwConfig *config, double *out);

/**
 * Simulates and verifies. `threads = 0` uses the default pool. Artifacts are
 * written to the config's output directory when `write_artifacts` is set.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_run(const struct BrwConfig *config,
                       uint32_t threads,
                       bool override_conditions,
                       bool write_artifacts,
                       struct BrwReport **out);

/**
 * # Safety
 * `report` must come from [`brw_run`] (or be null).
 */
void brw_report_free(struct BrwReport *report);

/**
 * Whether every enabled check passed.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_report_pass(const struct BrwReport *report, bool *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_report_counts(const struct BrwReport *report, struct BrwCounts *out);

/**
 * Number of checks in the report.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_report_check_count(const struct BrwReport *report, size_t *out);

/**
 * The report as a JSON string; release it with [`brw_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum BrwStatus brw_report_json(const struct BrwReport *report, char **out);

/**
 * # Safety
 * `s` must come from a `brw_*` function that documents this release (or be null).
 */
void brw_string_free(char *s);

/**
 * Characteristic function of the innovation law at each of the `len` points `t`.
 *
 * # Safety
 * `t`, `re` and `im` must each hold `len` doubles.
 */
enum BrwStatus brw_cf_q(double alpha,
                        double c,
                        const double *t,
                        size_t len,
                        double *re,
                        double *im);

/**
 * Characteristic function of the stationary AR(1) marginal with `phi = kappa^(1/alpha)`.
 *
 * # Safety
 * `t`, `re` and `im` must each hold `len` doubles.
 */
enum BrwStatus brw_cf_u0(double alpha,
                         double c,
                         double kappa,
                         const double *t,
                         size_t len,
                         double *re,
                         double *im);

/**
 * Scale-mixture characteristic function over the `n_weights` mixing weights.
 *
 * # Safety
 * `weights` must hold `n_weights` doubles; `t`, `re` and `im` must hold `len`.
 */
enum BrwStatus brw_mixture_cf(double alpha,
                              double c,
                              double kappa,
                              const double *weights,
                              size_t n_weights,
                              const double *t,
                              size_t len,
                              double *re,
                              double *im);

/**
 * Solves `m(theta) = target` for `K ~ Pareto(k_tail)` of mean `k_mean` on
 * `{k_min, k_min + 1, ...}`, `Y ~ Exp(y_rate)` and the given lattice spacing.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BrwStatus brw_calibrate_infinite(double k_tail,
                                      uint64_t k_min,
                                      double k_mean,
                                      double y_rate,
                                      double spacing,
                                      double target,
                                      double alpha,
                                      struct BrwCalibration *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRWLAB_H */
