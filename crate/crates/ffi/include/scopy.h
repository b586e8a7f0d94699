/* SPDX-License-Identifier: Apache-2.0 */

#ifndef SCOPY_H
#define SCOPY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every library call.
 */
typedef enum ScopyStatus {
  SCOPY_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SCOPY_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SCOPY_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON, an unknown enum value, an unregistered annotator or
   * a commit that cannot be analysed.
   */
  SCOPY_STATUS_INVALID_INPUT = 3,
  SCOPY_STATUS_NOT_FOUND = 4,
  /**
   * The write contradicts stored state, e.g. a vote on a commit whose
   * consensus is final.
   */
  SCOPY_STATUS_CONFLICT = 5,
  /**
   * File system failure or corrupt store files.
   */
  SCOPY_STATUS_IO = 6,
  /**
   * The library panicked; the handle involved should be discarded.
   */
  SCOPY_STATUS_PANIC = 7,
} ScopyStatus;

/**
 * Trained classifier loaded from a checkpoint.
 */
typedef struct ScopyModel ScopyModel;

/**
 * Open triage store.
 */
typedef struct ScopyStore ScopyStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *scopy_version(void);

/**
 * Message for the last failed call on this thread, or NULL if the last
 * call succeeded. Do not free.
 */
const char *scopy_last_error(void);

/**
 * Releases a string returned by the library.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library that has not been
 * freed yet.
 */
void scopy_string_free(char *s);

/**
 * Opens (creating if needed) the store in directory `dir` with the default
 * annotator roster.
 *
 * # Safety
 * `dir` must be a valid C string; `out` must point to writable storage.
 */
enum ScopyStatus scopy_store_open(const char *dir, struct ScopyStore **out);

/**
 * # Safety
 * `store` must be NULL or a handle from [`scopy_store_open`] not yet freed.
 */
void scopy_store_free(struct ScopyStore *store);

/**
 * Number of candidate records.
 *
 * # Safety
 * `store` must be a live handle; `out_len` must be writable.
 */
enum ScopyStatus scopy_store_len(const struct ScopyStore *store, size_t *out_len);

/**
 * Adds a commit bundle (JSON) as a candidate. `origin` is `"base"`,
 * `"pilot"` or `"augmented"`; NULL means pilot. The record gets the
 * matched security keywords and a fix-pattern tag. `*out_created` is false
 * when the commit was already present.
 *
 * # Safety
 * Pointers must be valid as described; `origin` may be NULL.
 */
enum ScopyStatus scopy_store_ingest(const struct ScopyStore *store,
                                    const char *bundle_json,
                                    const char *origin,
                                    bool *out_created);

/**
 * Candidate records as a JSON array. `status` (`pending`, `voted`,
 * `consensus`) and `source` (`cve`, `keyword`, `model`) filter the list
 * when non-NULL.
 *
 * # Safety
 * Pointers must be valid as described; `status` and `source` may be NULL.
 */
enum ScopyStatus scopy_store_candidates(const struct ScopyStore *store,
                                        const char *status,
                                        const char *source,
                                        char **out_json);

/**
 * One record as JSON.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_store_record(const struct ScopyStore *store,
                                    const char *commit_id,
                                    char **out_json);

/**
 * Appends a vote (`security`, `non_security` or `unsure`) and finalizes
 * the consensus once the votes decide it. Writes the updated record.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_store_vote(const struct ScopyStore *store,
                                  const char *commit_id,
                                  const char *annotator,
                                  const char *label,
                                  char **out_json);

/**
 * Consensus state as JSON, e.g. `{"status":"decided","consensus":"security"}`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_store_consensus(const struct ScopyStore *store,
                                       const char *commit_id,
                                       char **out_json);

/**
 * Dataset statistics as JSON, listing at most `top_repos` repositories.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_store_stats(const struct ScopyStore *store,
                                   size_t top_repos,
                                   char **out_json);

/**
 * Sliced commit graph of a bundle, as the JSON graph document.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_commit_graph(const char *bundle_json, char **out_json);

/**
 * Default security keywords found in a commit message, as a JSON array.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_match_keywords(const char *message, char **out_json);

/**
 * Fix-pattern label of a bundle, as JSON `{"category":..,"evidence":[..]}`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_tag_pattern(const char *bundle_json, char **out_json);

/**
 * Loads a model checkpoint. Node features use the hashing embedder with
 * the checkpoint's input width and the given seed.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum ScopyStatus scopy_model_load(const char *path, uint64_t embed_seed, struct ScopyModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from [`scopy_model_load`] not yet freed.
 */
void scopy_model_free(struct ScopyModel *model);

/**
 * Security probability of a commit bundle and whether it reaches the
 * checkpoint's threshold.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScopyStatus scopy_model_score(const struct ScopyModel *model,
                                   const char *bundle_json,
                                   double *out_probability,
                                   bool *out_security);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCOPY_H */
