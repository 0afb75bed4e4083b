#ifndef HME_H
#define HME_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmeStatus {
  HmeStatus_Ok = 0,
  HmeStatus_NullArgument = 1,
  HmeStatus_InvalidUtf8 = 2,
  HmeStatus_Io = 3,
  HmeStatus_BadCheckpoint = 4,
  HmeStatus_AlphabetMismatch = 5,
  HmeStatus_InvalidInput = 6,
  HmeStatus_EmptyInput = 7,
  HmeStatus_Internal = 8,
} HmeStatus;

/**
 * Opaque recognizer handle.
 */
typedef struct HmeRecognizer HmeRecognizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the JSON documents this library produces.
 */
uint32_t hme_api_version(void);

/**
 * Load a checkpoint file. On success `*out` receives a handle that must be
 * released with [`hme_recognizer_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HmeStatus hme_recognizer_load(const char *path, struct HmeRecognizer **out);

/**
 * Like [`hme_recognizer_load`] but from checkpoint JSON held in memory.
 *
 * # Safety
 * `json` must point to `len` readable bytes and `out` be a valid pointer.
 */
enum HmeStatus hme_recognizer_from_json(const uint8_t *json,
                                        uintptr_t len,
                                        struct HmeRecognizer **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `rec` must come from one of the load functions and not be used afterwards.
 */
void hme_recognizer_free(struct HmeRecognizer *rec);

/**
 * Recognize `{"strokes": [[[x,y],...],...]}` and return the result JSON in
 * `*out_json`. The handle is only read, so one handle may be shared by
 * several threads.
 *
 * # Safety
 * `rec` must be a live handle, `strokes_json` a NUL-terminated string and
 * `out_json` a valid pointer.
 */
enum HmeStatus hme_recognize_json(const struct HmeRecognizer *rec,
                                  const char *strokes_json,
                                  char **out_json);

/**
 * Hash of the label alphabet compiled into this library; a checkpoint
 * only loads when its hash matches.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HmeStatus hme_alphabet_hash(char **out);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *hme_last_error(void);

/**
 * Free a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void hme_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HME_H */
