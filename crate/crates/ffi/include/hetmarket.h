#ifndef HETMARKET_H
#define HETMARKET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_UTF8 = 2,
  HM_STATUS_CONFIG = 3,
  HM_STATUS_DOMAIN = 4,
  HM_STATUS_NUMERICAL = 5,
  HM_STATUS_CLEARING = 6,
  HM_STATUS_STATS = 7,
  HM_STATUS_IO = 8,
  HM_STATUS_PARSE = 9,
  HM_STATUS_BUFFER_TOO_SMALL = 10,
  /**
   * A previous step failed; the simulation cannot continue.
   */
  HM_STATUS_POISONED = 11,
  HM_STATUS_PANIC = 12,
} HmStatus;

/**
 * Opaque simulation handle.
 */
typedef struct HmSimulation HmSimulation;

/**
 * Summary of one completed step.
 */
typedef struct HmStepInfo {
  size_t step;
  size_t clearing_sweeps;
  double clearing_residual;
  double share_fundamentalist;
  double share_chartist;
} HmStepInfo;

/**
 * Headline numbers of a stylized-facts report.
 */
typedef struct HmStylizedSummary {
  size_t n;
  double mean;
  double median;
  double sd;
  /**
   * NaN for a constant series.
   */
  double kurtosis;
  /**
   * NaN for a constant series.
   */
  double skewness;
  double hurst_abs;
  double raw_acf_inside;
  double abs_acf_above;
  bool fat_tails;
  bool no_raw_memory;
  bool volatility_clustering;
} HmStylizedSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hm_last_error_message(void);

/**
 * Creates a simulation from TOML config text (null for baseline values).
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum HmStatus hm_simulation_new(const char *config_toml, uint64_t seed, struct HmSimulation **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from [`hm_simulation_new`] not yet freed.
 */
void hm_simulation_free(struct HmSimulation *sim);

/**
 * Advances one period. `info` may be null.
 *
 * # Safety
 * `sim` must be a live handle; `info` null or valid.
 */
enum HmStatus hm_simulation_step(struct HmSimulation *sim, struct HmStepInfo *info);

/**
 * Number of risky assets, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t hm_simulation_assets(const struct HmSimulation *sim);

/**
 * Steps completed so far, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t hm_simulation_step_index(const struct HmSimulation *sim);

/**
 * Copies current prices into `out[0..len]`; `len` must be at least the
 * asset count.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for `len` writes.
 */
enum HmStatus hm_simulation_prices(const struct HmSimulation *sim, double *out, size_t len);

/**
 * Current (fundamentalist, chartist) wealth shares.
 *
 * # Safety
 * `sim` must be a live handle; `fundamentalist` and `chartist` valid.
 */
enum HmStatus hm_simulation_wealth_shares(const struct HmSimulation *sim,
                                          double *fundamentalist,
                                          double *chartist);

/**
 * Runs a full simulation and writes its output files into `out_dir`.
 *
 * # Safety
 * `config_toml` null or NUL-terminated; `out_dir` NUL-terminated.
 */
enum HmStatus hm_run_to_dir(const char *config_toml, uint64_t seed, const char *out_dir);

/**
 * Stylized-facts report of `series[0..len]`.
 *
 * # Safety
 * `series` must be valid for `len` reads and `out` valid.
 */
enum HmStatus hm_stylized_report(const double *series, size_t len, struct HmStylizedSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETMARKET_H */
