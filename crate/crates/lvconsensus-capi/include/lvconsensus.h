/* C interface to the lvconsensus simulation and exact-solving toolkit. */

#ifndef LVCONSENSUS_H
#define LVCONSENSUS_H

/* Generated by the crate build script from the Rust source; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LvStatus {
  /**
   * Success.
   */
  LV_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LV_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LV_STATUS_INVALID_UTF8 = 2,
  /**
   * Text could not be parsed as a model spec.
   */
  LV_STATUS_PARSE_ERROR = 3,
  /**
   * An argument was outside its valid range (bad rate, count, grid size,
   * zero trials, or a probe outside the solved grid).
   */
  LV_STATUS_DOMAIN_ERROR = 4,
  /**
   * The iterative solver did not reach its tolerance.
   */
  LV_STATUS_NO_CONVERGENCE = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  LV_STATUS_PANIC = 6,
} LvStatus;

/**
 * How a single run ended; mirrors the core outcome.
 */
typedef enum LvOutcome {
  /**
   * Species 0 (initial majority) is the sole survivor.
   */
  LV_OUTCOME_MAJORITY_WON = 0,
  /**
   * Species 1 is the sole survivor.
   */
  LV_OUTCOME_MINORITY_WON = 1,
  LV_OUTCOME_BOTH_EXTINCT = 2,
  /**
   * Step cap hit before consensus.
   */
  LV_OUTCOME_CENSORED = 3,
} LvOutcome;

/**
 * Opaque solved grid of exact win probabilities (and optionally mean
 * consensus times) over `{0..xmax}^2`.
 */
typedef struct LvExact LvExact;

/**
 * Opaque parsed model. One per configuration; cheap to copy on the Rust
 * side, so handles are independent.
 */
typedef struct LvSpec LvSpec;

/**
 * Accounting of a single run to consensus.
 */
typedef struct LvRunStats {
  uint64_t steps;
  enum LvOutcome outcome;
  /**
   * Steps split by event family: individual + competitive = steps.
   */
  uint64_t individual;
  uint64_t competitive;
  /**
   * Individual events that shrank the leader's margin while both species
   * were alive.
   */
  uint64_t bad_noncomp;
  /**
   * Gap loss totals (initial lead minus final lead, telescoped), split by
   * family.
   */
  int64_t f_total;
  int64_t f_individual;
  int64_t f_competitive;
  /**
   * A state strictly before consensus had equal counts.
   */
  bool hit_tie;
  /**
   * Peak population over the run.
   */
  uint64_t max_total;
} LvRunStats;

/**
 * Monte Carlo estimate over many runs. Counts satisfy
 * `wins + losses + both_extinct + censored = trials`; means and frequencies
 * are over the completed (non-censored) trials and are NaN when every trial
 * was censored.
 */
typedef struct LvEstimate {
  uint64_t trials;
  uint64_t wins;
  uint64_t losses;
  uint64_t both_extinct;
  uint64_t censored;
  /**
   * `(wins + both_extinct / 2) / (trials - censored)`.
   */
  double rho_hat;
  /**
   * 99% score interval around `rho_hat`.
   */
  double ci_low;
  double ci_high;
  /**
   * Mean and standard error of the consensus event count.
   */
  double mean_t;
  double se_t;
  /**
   * Individual events per trial.
   */
  double mean_i;
  double se_i;
  /**
   * Competitive events per trial.
   */
  double mean_k;
  double se_k;
  /**
   * Bad individual events per trial.
   */
  double mean_j;
  double se_j;
  /**
   * Gap loss per trial.
   */
  double mean_f;
  double se_f;
  /**
   * Peak population per trial.
   */
  double mean_max_total;
  double se_max_total;
  /**
   * Fraction of completed trials that passed through a tie.
   */
  double hit_tie_freq;
} LvEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of this library as a static NUL-terminated string.
 */
const char *lv_version(void);

/**
 * Static human-readable name for a status code.
 */
const char *lv_status_str(enum LvStatus status);

/**
 * Message of the most recent failure on this thread, or an empty string.
 * Valid until the next failing call on the same thread.
 */
const char *lv_last_error(void);

/**
 * Parses spec text (`key=value` pairs separated by commas or newlines, `#`
 * comments allowed) into a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum LvStatus lv_spec_parse(const char *text, struct LvSpec **out);

/**
 * Builds a spec from raw rates. `self_destructive` selects whether both
 * members of a competitive pair die (true) or only the opponent (false).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LvStatus lv_spec_new(double alpha0,
                          double alpha1,
                          double beta,
                          double delta,
                          double gamma0,
                          double gamma1,
                          bool self_destructive,
                          struct LvSpec **out);

/**
 * Renders the spec in the same inline form `lv_spec_parse` accepts. The
 * string is owned by the caller; release it with `lv_string_free`.
 *
 * # Safety
 * `spec` must be a live handle from this library; `out` must be valid.
 */
enum LvStatus lv_spec_inline(const struct LvSpec *spec, char **out);

/**
 * Releases a string returned by this library. Accepts null.
 *
 * # Safety
 * `s` must have come from this library and not been freed before.
 */
void lv_string_free(char *s);

/**
 * Releases a spec handle. Accepts null.
 *
 * # Safety
 * `spec` must have come from this library and not been freed before.
 */
void lv_spec_free(struct LvSpec *spec);

/**
 * Runs one jump chain from `(x0, x1)` until consensus or `max_steps`
 * (0 means the default cap of `1000 (n + 1) + 1e6` events). Requires
 * `x0 >= x1`; species 0 is the initial majority by convention. The run uses
 * the random substream `(seed, cell 0, trial 0)`.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be valid.
 */
enum LvStatus lv_run_to_consensus(const struct LvSpec *spec,
                                  uint64_t x0,
                                  uint64_t x1,
                                  uint64_t seed,
                                  uint64_t max_steps,
                                  struct LvRunStats *out);

/**
 * Estimates the majority win probability from `(x0, x1)` over `trials`
 * independent jump-chain runs. The slots may be given in either order; the
 * estimate is always for the side that starts ahead. Equal seeds give
 * bit-equal estimates.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be valid.
 */
enum LvStatus lv_estimate_rho(const struct LvSpec *spec,
                              uint64_t x0,
                              uint64_t x1,
                              uint64_t trials,
                              uint64_t seed,
                              struct LvEstimate *out);

/**
 * Solves the exact win probabilities (and mean consensus times when
 * requested) on the truncated grid `{0..xmax}^2` with births suppressed at
 * the top faces. `xmax` must lie in `[2, 4096]`.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be valid.
 */
enum LvStatus lv_exact_new(const struct LvSpec *spec,
                           uint32_t xmax,
                           bool compute_mean_t,
                           struct LvExact **out);

/**
 * Grid size of a solved handle (0 for null).
 *
 * # Safety
 * `grid` must be a live handle or null.
 */
uint32_t lv_exact_xmax(const struct LvExact *grid);

/**
 * Probability that species 0 wins from `(a, b)`, with the fair-coin value
 * one half at `(0, 0)`.
 *
 * # Safety
 * `grid` must be a live handle; `out` must be valid.
 */
enum LvStatus lv_exact_rho(const struct LvExact *grid, uint32_t a, uint32_t b, double *out);

/**
 * Expected number of events until consensus from `(a, b)`. Fails with
 * `LV_STATUS_DOMAIN_ERROR` when the grid was solved without mean times.
 *
 * # Safety
 * `grid` must be a live handle; `out` must be valid.
 */
enum LvStatus lv_exact_mean_t(const struct LvExact *grid, uint32_t a, uint32_t b, double *out);

/**
 * Releases a solved grid. Accepts null.
 *
 * # Safety
 * `grid` must have come from this library and not been freed before.
 */
void lv_exact_free(struct LvExact *grid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LVCONSENSUS_H */
