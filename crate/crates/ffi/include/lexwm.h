#ifndef LEXWM_H
#define LEXWM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LexwmStatus {
  LEXWM_STATUS_OK = 0,
  LEXWM_STATUS_NULL_POINTER = 1,
  LEXWM_STATUS_INVALID_UTF8 = 2,
  LEXWM_STATUS_INVALID_ARGUMENT = 3,
  LEXWM_STATUS_INVALID_LEXICON = 4,
  LEXWM_STATUS_PARSE = 5,
  LEXWM_STATUS_INVALID_KEY = 6,
  LEXWM_STATUS_NO_EVIDENCE = 7,
  LEXWM_STATUS_INSUFFICIENT_GROUPS = 8,
  LEXWM_STATUS_IO = 9,
  LEXWM_STATUS_PANIC = 10,
} LexwmStatus;

typedef enum LexwmDecision {
  LEXWM_DECISION_NO_EVIDENCE = 0,
  LEXWM_DECISION_SUSPECTED = 1,
  LEXWM_DECISION_CONFIRMED = 2,
} LexwmDecision;

/**
 * Opaque lexicon handle.
 */
typedef struct LexwmLexicon LexwmLexicon;

/**
 * Opaque lexicon + key handle. Safe to share across threads.
 */
typedef struct LexwmWatermarker LexwmWatermarker;

/**
 * Numeric part of a verification report. Warnings are only counted here;
 * the JSON form carries their text.
 */
typedef struct LexwmReport {
  double hit;
  double p_value;
  double beta1;
  double beta2;
  double p_null;
  uint64_t n;
  uint64_t k;
  double tau;
  double alpha;
  enum LexwmDecision decision;
  size_t warning_count;
} LexwmReport;

typedef struct LexwmBinomialTest {
  double beta1;
  double beta2;
  double p_value;
} LexwmBinomialTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lexwm_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *lexwm_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void lexwm_string_free(char *s);

/**
 * Loads and validates a lexicon TSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LexwmStatus lexwm_lexicon_load(const char *path, struct LexwmLexicon **out);

/**
 * Parses lexicon TSV text.
 *
 * # Safety
 * `tsv` must be a NUL-terminated string; `out` must be writable.
 */
enum LexwmStatus lexwm_lexicon_parse(const char *tsv, struct LexwmLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a live handle; it is invalid afterwards.
 */
void lexwm_lexicon_free(struct LexwmLexicon *lexicon);

/**
 * Number of groups and substitutes per group.
 *
 * # Safety
 * `lexicon` must be a live handle; `groups` and `m` must be writable.
 */
enum LexwmStatus lexwm_lexicon_shape(const struct LexwmLexicon *lexicon, size_t *groups, size_t *m);

/**
 * Hex SHA-256 fingerprint of the canonical lexicon; free with
 * `lexwm_string_free`.
 *
 * # Safety
 * `lexicon` must be a live handle; `out` must be writable.
 */
enum LexwmStatus lexwm_lexicon_fingerprint(const struct LexwmLexicon *lexicon, char **out);

/**
 * Pairs a copy of `lexicon` with a raw key of at least 16 bytes. The
 * lexicon handle may be freed afterwards.
 *
 * # Safety
 * `lexicon` must be a live handle, `key` must point to `key_len` readable
 * bytes and `out` must be writable.
 */
enum LexwmStatus lexwm_watermarker_new(const struct LexwmLexicon *lexicon,
                                       const uint8_t *key,
                                       size_t key_len,
                                       struct LexwmWatermarker **out);

/**
 * # Safety
 * `wm` must be null or a live handle; it is invalid afterwards.
 */
void lexwm_watermarker_free(struct LexwmWatermarker *wm);

/**
 * Watermarks `text`. `replacements` (nullable) receives the number of
 * triggered words, identity substitutions included.
 *
 * # Safety
 * `wm` must be a live handle, `text` a NUL-terminated string and `out`
 * writable.
 */
enum LexwmStatus lexwm_watermark_apply(const struct LexwmWatermarker *wm,
                                       const char *text,
                                       char **out,
                                       size_t *replacements);

/**
 * Verifies a corpus of `count` lines. Pass NaN as `tau` for the default
 * threshold.
 *
 * # Safety
 * `wm` must be a live handle, `lines` must point to `count` NUL-terminated
 * strings and `out` must be writable.
 */
enum LexwmStatus lexwm_verify(const struct LexwmWatermarker *wm,
                              const char *const *lines,
                              size_t count,
                              double tau,
                              double alpha,
                              struct LexwmReport *out);

/**
 * Same as `lexwm_verify` but returns the full JSON report, including tool
 * version, lexicon fingerprint and warnings.
 *
 * # Safety
 * As for `lexwm_verify`; `out` receives a string to free with
 * `lexwm_string_free`.
 */
enum LexwmStatus lexwm_verify_json(const struct LexwmWatermarker *wm,
                                   const char *const *lines,
                                   size_t count,
                                   double tau,
                                   double alpha,
                                   char **out);

/**
 * Exact two-tailed binomial test of `k` successes in `n` trials.
 *
 * # Safety
 * `out` must be writable.
 */
enum LexwmStatus lexwm_binomial_p_value(uint64_t k,
                                        uint64_t n,
                                        double p,
                                        struct LexwmBinomialTest *out);

/**
 * Keyed 64-bit hash of `count` strings, as used for target selection.
 *
 * # Safety
 * `key` must point to `key_len` bytes, `parts` to `count` NUL-terminated
 * strings and `out` must be writable.
 */
enum LexwmStatus lexwm_keyed_hash64(const uint8_t *key,
                                    size_t key_len,
                                    const char *const *parts,
                                    size_t count,
                                    uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXWM_H */
