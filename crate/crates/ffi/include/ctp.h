#ifndef CTP_H
#define CTP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Fact file layout accepted by [`ctp_kb_load`].
 */
typedef enum CtpFormat {
  CTP_FORMAT_PROLOG = 0,
  CTP_FORMAT_TSV = 1,
} CtpFormat;

/**
 * Result code of every fallible call.
 */
typedef enum CtpStatus {
  CTP_STATUS_OK = 0,
  CTP_STATUS_NULL_POINTER = 1,
  CTP_STATUS_INVALID_UTF8 = 2,
  CTP_STATUS_IO = 3,
  CTP_STATUS_PARSE = 4,
  CTP_STATUS_UNKNOWN_SYMBOL = 5,
  CTP_STATUS_INVALID = 6,
  CTP_STATUS_PANIC = 7,
} CtpStatus;

/**
 * A knowledge base of ground facts.
 */
typedef struct CtpKb CtpKb;

/**
 * A trained model with the prover settings it was trained with.
 */
typedef struct CtpModel CtpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctp_version(void);

/**
 * Message of the last failed call on this thread, or null after a
 * successful one. Valid until the next call on the same thread.
 */
const char *ctp_last_error_message(void);

/**
 * Loads a checkpoint written by `ctp train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CtpStatus ctp_model_load(const char *path, struct CtpModel **out);

/**
 * # Safety
 * `model` must come from [`ctp_model_load`] and not be used afterwards.
 */
void ctp_model_free(struct CtpModel *model);

/**
 * Proof depth the model was trained with.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
int ctp_model_depth(const struct CtpModel *model);

/**
 * Loads ground facts from a file. Rules in the file are ignored.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CtpStatus ctp_kb_load(const char *path, enum CtpFormat format, struct CtpKb **out);

/**
 * # Safety
 * `kb` must come from [`ctp_kb_load`] and not be used afterwards.
 */
void ctp_kb_free(struct CtpKb *kb);

/**
 * Number of facts in `kb`, or -1 for a null handle.
 *
 * # Safety
 * `kb` must be a live handle or null.
 */
int ctp_kb_len(const struct CtpKb *kb);

/**
 * Scores `predicate(subject, object)` against `kb`. A negative `depth`
 * uses the model's training depth.
 *
 * # Safety
 * Handles must be live, strings NUL-terminated and `score` valid.
 */
enum CtpStatus ctp_prove(const struct CtpModel *model,
                         const struct CtpKb *kb,
                         const char *predicate,
                         const char *subject,
                         const char *object,
                         int depth,
                         double *score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTP_H */
