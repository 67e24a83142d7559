#ifndef CCS_H
#define CCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all functions.
typedef enum CcsStatus {
  CCS_STATUS_OK = 0,
  // A required pointer argument was null.
  CCS_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  CCS_STATUS_INVALID_UTF8 = 2,
  // An option was out of range or malformed.
  CCS_STATUS_INVALID_ARGUMENT = 3,
  // Filesystem, configuration or import failure.
  CCS_STATUS_ENVIRONMENT = 4,
  // Well-formed input that cannot be scored or compared.
  CCS_STATUS_DOMAIN = 5,
  // Row index past the end of the result set.
  CCS_STATUS_OUT_OF_RANGE = 6,
  // A Rust panic was caught at the boundary.
  CCS_STATUS_PANIC = 7,
} CcsStatus;

// Opaque handle to a scored studio.
typedef struct CcsScores CcsScores;

// Scoring parameters. Zero for `k_visual` or `k_text` means automatic.
typedef struct CcsOptions {
  uint64_t seed;
  size_t k_visual;
  size_t k_text;
  // `"builtin"` or `"import:PATH"`; null selects the builtin embedding.
  const char *embedding;
  // `"element"` or `"project"`; null selects `"element"`.
  const char *text_granularity;
} CcsOptions;

// One scored project. `index` is the row position for
// [`ccs_scores_project_id`].
typedef struct CcsScoreRow {
  size_t index;
  double originality_raw;
  double elaboration_raw;
  size_t textual_flex;
  size_t visual_flex;
  double flexibility_raw;
  double originality;
  double elaboration;
  double flexibility;
  double ccs;
  size_t rank;
} CcsScoreRow;

// Kendall tau-b with its two-sided normal-approximation p-value.
typedef struct CcsTau {
  double tau;
  double p_value;
  size_t n;
} CcsTau;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Scores every project in `studio_dir`. `opts` may be null for defaults.
// On success `*out` owns a new handle.
//
// # Safety
// `studio_dir` is a NUL-terminated string, `opts` is null or valid, and
// `out` is a valid pointer.
enum CcsStatus ccs_score_studio(const char *studio_dir,
                                const struct CcsOptions *opts,
                                struct CcsScores **out);

// Number of scored projects; 0 for a null handle.
//
// # Safety
// `scores` is null or a live handle.
size_t ccs_scores_len(const struct CcsScores *scores);

// Copies row `index` (rows are sorted by project id) into `*row`.
//
// # Safety
// `scores` is a live handle and `row` a valid pointer.
enum CcsStatus ccs_scores_get(const struct CcsScores *scores,
                              size_t index,
                              struct CcsScoreRow *row);

// Project id of row `index`, or null if out of range. The string is owned
// by the handle and valid until [`ccs_scores_free`].
//
// # Safety
// `scores` is null or a live handle.
const char *ccs_scores_project_id(const struct CcsScores *scores, size_t index);

// The `scores.json` document (`{"meta": ..., "scores": [...]}`). Free the
// result with [`ccs_string_free`].
//
// # Safety
// `scores` is a live handle and `out` a valid pointer.
enum CcsStatus ccs_scores_to_json(const struct CcsScores *scores, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or came from this library and has not been freed.
void ccs_string_free(char *s);

// Releases a handle. Null is ignored.
//
// # Safety
// `scores` is null or a live handle that is not used afterwards.
void ccs_scores_free(struct CcsScores *scores);

// Kendall tau-b of two paired samples of length `len`.
//
// # Safety
// `x` and `y` point to `len` doubles each and `out` is valid.
enum CcsStatus ccs_kendall_tau_b(const double *x, const double *y, size_t len, struct CcsTau *out);

// Message for the last failure on this thread, or null after a success.
// Valid until the next call into this library on the same thread.
const char *ccs_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ccs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCS_H */
