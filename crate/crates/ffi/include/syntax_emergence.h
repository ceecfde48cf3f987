#ifndef SYNTAX_EMERGENCE_H
#define SYNTAX_EMERGENCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeStatus {
  SE_STATUS_OK = 0,
  // Invalid configuration, usage or input data.
  SE_STATUS_CONFIG_ERROR = 1,
  // The simulation or a computation failed.
  SE_STATUS_RUNTIME_ERROR = 2,
  SE_STATUS_NULL_POINTER = 3,
  SE_STATUS_INVALID_ARGUMENT = 4,
} SeStatus;

typedef struct SeEnsemble SeEnsemble;

// One language history in progress.
typedef struct SeHistory SeHistory;

// A validated single-model scenario.
typedef struct SeScenario SeScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message for the last failed call on this thread, or null. Valid until
// the next call on the same thread.
const char *se_last_error(void);

// Library version as a static NUL-terminated string.
const char *se_version(void);

// Parses a scenario from a JSON configuration (the same format as the CLI).
// Phased scenarios are rejected.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SeStatus se_scenario_from_json(const char *json, struct SeScenario **out);

// # Safety
// `scenario` must come from `se_scenario_from_json` or be null.
void se_scenario_free(struct SeScenario *scenario);

// Number of probability cells the scenario's model exposes.
//
// # Safety
// Pointers must be valid.
enum SeStatus se_scenario_cell_count(const struct SeScenario *scenario, size_t *out);

// Starts a history on stream `stream` of `seed`; stream `h` reproduces
// history `h` of an ensemble with the same seed.
//
// # Safety
// Pointers must be valid.
enum SeStatus se_history_new(const struct SeScenario *scenario,
                             uint64_t seed,
                             uint64_t stream,
                             struct SeHistory **out);

// # Safety
// `history` must come from `se_history_new` or be null.
void se_history_free(struct SeHistory *history);

// Produces `n` more utterances.
//
// # Safety
// `history` must be valid.
enum SeStatus se_history_step(struct SeHistory *history, uint64_t n);

// Utterances produced so far.
//
// # Safety
// Pointers must be valid.
enum SeStatus se_history_utterances(const struct SeHistory *history, uint64_t *out);

// Current cell probabilities.
//
// # Safety
// `buf` must hold `len` doubles; other pointers must be valid.
enum SeStatus se_history_probabilities(const struct SeHistory *history,
                                       double *buf,
                                       size_t len,
                                       size_t *written);

// Current raw counts, in the model's own layout.
//
// # Safety
// `buf` must hold `len` doubles; other pointers must be valid.
enum SeStatus se_history_counts(const struct SeHistory *history,
                                double *buf,
                                size_t len,
                                size_t *written);

// Runs `histories` histories of `utterances` each. `workers` = 0 uses one
// worker per available core; results do not depend on it.
//
// # Safety
// Pointers must be valid.
enum SeStatus se_ensemble_run(const struct SeScenario *scenario,
                              size_t histories,
                              uint64_t utterances,
                              uint64_t seed,
                              size_t workers,
                              double epsilon,
                              struct SeEnsemble **out);

// # Safety
// `ensemble` must come from `se_ensemble_run` or be null.
void se_ensemble_free(struct SeEnsemble *ensemble);

// Fraction of histories with a converged verdict.
//
// # Safety
// Pointers must be valid.
enum SeStatus se_ensemble_converged_fraction(const struct SeEnsemble *ensemble, double *out);

// Per-history verdicts: the winning cell index, or -1 when unresolved.
//
// # Safety
// `buf` must hold `len` values; other pointers must be valid.
enum SeStatus se_ensemble_verdicts(const struct SeEnsemble *ensemble,
                                   int64_t *buf,
                                   size_t len,
                                   size_t *written);

// Ensemble mean of each cell at the final checkpoint.
//
// # Safety
// `buf` must hold `len` doubles; other pointers must be valid.
enum SeStatus se_ensemble_final_mean(const struct SeEnsemble *ensemble,
                                     double *buf,
                                     size_t len,
                                     size_t *written);

// The full ensemble result as JSON, NUL-terminated. `written` receives the
// size in bytes including the terminator.
//
// # Safety
// `buf` must hold `len` bytes; other pointers must be valid.
enum SeStatus se_ensemble_json(const struct SeEnsemble *ensemble,
                               char *buf,
                               size_t len,
                               size_t *written);

// c_i / (Σc + α).
//
// # Safety
// `counts` must hold `len` doubles; `out` must be writable.
enum SeStatus se_hre_probability(const double *counts,
                                 size_t len,
                                 double alpha,
                                 size_t index,
                                 double *out);

// Bayes posterior over messages from per-message weights and priors.
//
// # Safety
// `weights`, `priors` and `out` must each hold `len` doubles.
enum SeStatus se_posterior(const double *weights, const double *priors, size_t len, double *out);

// Long-run P(f^u | m_obj) and P(m_subj | f^u) for subject probability `p`.
//
// # Safety
// Output pointers must be writable.
enum SeStatus se_limit_prediction(double p,
                                  double *speaker_unmarked_given_obj,
                                  double *hearer_subj_given_unmarked);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNTAX_EMERGENCE_H */
