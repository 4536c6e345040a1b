#ifndef REPGEN_H
#define REPGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RepgenStatus {
  REPGEN_STATUS_OK = 0,
  REPGEN_STATUS_NULL_POINTER = 1,
  REPGEN_STATUS_INVALID_ARGUMENT = 2,
  REPGEN_STATUS_IO = 3,
  REPGEN_STATUS_PARSE = 4,
  REPGEN_STATUS_NUMERIC = 5,
  REPGEN_STATUS_LOOKUP = 6,
  REPGEN_STATUS_UTF8 = 7,
  REPGEN_STATUS_PANIC = 8,
  REPGEN_STATUS_OTHER = 9,
} RepgenStatus;

typedef enum RepgenLossMode {
  REPGEN_LOSS_MODE_ONE_HOT = 0,
  REPGEN_LOSS_MODE_LABEL_SMOOTHING = 1,
  REPGEN_LOSS_MODE_WEIGHTED = 2,
} RepgenLossMode;

/**
 * Opaque trained generator.
 */
typedef struct RepgenModel RepgenModel;

/**
 * Opaque repeat scorer.
 */
typedef struct RepgenScorer RepgenScorer;

/**
 * Decoder settings. `max_length` 0 selects twice the source length plus 5.
 */
typedef struct RepgenRsmParams {
  double alpha;
  double beta;
  size_t beam_size;
  size_t max_length;
  bool use_lp;
  bool use_cp;
  bool use_rs;
  double rs_floor;
} RepgenRsmParams;

typedef struct RepgenSignificance {
  double statistic;
  double p_value;
  /**
   * 1 for the exact distribution, 0 for the normal approximation.
   */
  bool exact;
} RepgenSignificance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next repgen call on the same thread.
 */
const char *repgen_last_error(void);

/**
 * Library version, static storage.
 */
const char *repgen_version(void);

/**
 * # Safety
 * `s` must come from a repgen function and not have been freed.
 */
void repgen_string_free(char *s);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum RepgenStatus repgen_model_load(const char *path, struct RepgenModel **out);

/**
 * # Safety
 * `model` must come from [`repgen_model_load`] and not have been freed.
 */
void repgen_model_free(struct RepgenModel *model);

/**
 * Vocabulary size, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t repgen_model_vocab_size(const struct RepgenModel *model);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum RepgenStatus repgen_scorer_load(const char *path, struct RepgenScorer **out);

/**
 * # Safety
 * `scorer` must come from [`repgen_scorer_load`] and not have been freed.
 */
void repgen_scorer_free(struct RepgenScorer *scorer);

struct RepgenRsmParams repgen_rsm_params_default(void);

/**
 * Decodes a response for one utterance given as parallel arrays of
 * `n_tokens` surfaces and POS tags (`noun`, `verb`, ...). Writes a JSON
 * object with `output`, `score`, `terms` and `beam` to `out_json`.
 *
 * # Safety
 * `model` must be live; `scorer` may be null; `surfaces` and `tags` must
 * each hold `n_tokens` nul-terminated strings; `params` may be null for
 * defaults; `out_json` must be writable.
 */
enum RepgenStatus repgen_generate(const struct RepgenModel *model,
                                  const struct RepgenScorer *scorer,
                                  const char *const *surfaces,
                                  const char *const *tags,
                                  size_t n_tokens,
                                  const struct RepgenRsmParams *params,
                                  char **out_json);

/**
 * Fills `out_q[0..k]` with the training target distribution for
 * `target`. `r` holds `k` repeat weights and may be null outside
 * weighted mode.
 *
 * # Safety
 * `r` (when non-null) and `out_q` must hold `k` elements.
 */
enum RepgenStatus repgen_wls_target(enum RepgenLossMode mode,
                                    size_t target,
                                    size_t k,
                                    double epsilon,
                                    double gamma,
                                    const double *r,
                                    double *out_q);

double repgen_length_penalty(size_t length, double alpha);

/**
 * Unclipped coverage penalty over a row-major `rows x cols` attention
 * matrix (one row per response token). `floored` (may be null) reports
 * whether a zero column sum was replaced by `floor`.
 *
 * # Safety
 * `attention` must hold `rows * cols` values; `out` must be writable.
 */
enum RepgenStatus repgen_coverage_penalty(const double *attention,
                                          size_t rows,
                                          size_t cols,
                                          double beta,
                                          double floor,
                                          double *out,
                                          bool *floored);

/**
 * `log max(sum of scores, floor)`.
 *
 * # Safety
 * `scores` must hold `n` values.
 */
enum RepgenStatus repgen_repeat_term(const double *scores, size_t n, double floor, double *out);

/**
 * ROUGE-N F1 of a whitespace-tokenized candidate, max over references.
 *
 * # Safety
 * `candidate` and each of the `n_refs` references must be nul-terminated.
 */
enum RepgenStatus repgen_rouge_n(const char *candidate,
                                 const char *const *references,
                                 size_t n_refs,
                                 size_t n,
                                 double *out);

/**
 * ROUGE-L F1 of a whitespace-tokenized candidate, max over references.
 *
 * # Safety
 * As [`repgen_rouge_n`].
 */
enum RepgenStatus repgen_rouge_l(const char *candidate,
                                 const char *const *references,
                                 size_t n_refs,
                                 double *out);

/**
 * Two-sided Wilcoxon rank-sum test.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` values; `out` must be writable.
 */
enum RepgenStatus repgen_wilcoxon(const double *a,
                                  size_t na,
                                  const double *b,
                                  size_t nb,
                                  struct RepgenSignificance *out);

/**
 * Runs the command-line driver with `argc` arguments (program name
 * first) and returns its exit code.
 *
 * # Safety
 * `argv` must hold `argc` nul-terminated strings.
 */
int repgen_cli_main(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPGEN_H */
