#ifndef SSVEP_CSTL_H
#define SSVEP_CSTL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsvepStatus {
  SSVEP_STATUS_OK = 0,
  SSVEP_STATUS_NULL_POINTER = 1,
  SSVEP_STATUS_INVALID_ARGUMENT = 2,
  SSVEP_STATUS_DIMENSION = 3,
  SSVEP_STATUS_NON_FINITE = 4,
  SSVEP_STATUS_IO = 5,
  SSVEP_STATUS_FORMAT = 6,
  SSVEP_STATUS_NUMERICAL = 7,
  SSVEP_STATUS_BUFFER_TOO_SMALL = 8,
  SSVEP_STATUS_PANIC = 99,
} SsvepStatus;

// A trained fuzzy decoder loaded from a checkpoint.
typedef struct SsvepDecoder SsvepDecoder;

// Intrinsic mode functions of one signal, highest frequency first, plus
// the residue.
typedef struct SsvepImfSet SsvepImfSet;

typedef struct SsvepDecoderInfo {
  double fs_hz;
  size_t n_channels;
  size_t n_classes;
  // Samples per channel that `ssvep_decoder_classify` expects at minimum.
  size_t raw_len;
  double window_s;
} SsvepDecoderInfo;

typedef struct SsvepPrediction {
  size_t class_index;
  double freq_hz;
  double confidence;
} SsvepPrediction;

typedef struct SsvepSiftConfig {
  size_t max_imfs;
  double sd_stop;
  size_t max_sift_iters;
} SsvepSiftConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message on this thread, including the
// terminating NUL. Zero if the last call succeeded.
size_t ssvep_last_error_length(void);

// Copies the last error message into `buf` as a NUL-terminated string,
// truncating if needed. Returns the number of bytes the full message needs.
//
// # Safety
// `buf` must be valid for `len` writable bytes, or null with `len == 0`.
size_t ssvep_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ssvep_version(void);

// # Safety
// `path` must be a NUL-terminated string and `out_decoder` a valid pointer.
enum SsvepStatus ssvep_decoder_load(const char *path, struct SsvepDecoder **out_decoder);

// # Safety
// `decoder` must come from `ssvep_decoder_load` and not be used afterwards.
// Null is ignored.
void ssvep_decoder_free(struct SsvepDecoder *decoder);

// # Safety
// Both pointers must be valid.
enum SsvepStatus ssvep_decoder_info(const struct SsvepDecoder *decoder,
                                    struct SsvepDecoderInfo *info);

// Decodes one raw trial starting at stimulus onset.
//
// `data` holds `n_channels * n_samples` values, channel-major. If `scores`
// is non-null it receives the per-class logits and `scores_len` must be at
// least the class count.
//
// # Safety
// Pointers must be valid for the stated lengths; `scores` may be null.
enum SsvepStatus ssvep_decoder_classify(const struct SsvepDecoder *decoder,
                                        const double *data,
                                        size_t n_channels,
                                        size_t n_samples,
                                        double fs_hz,
                                        struct SsvepPrediction *prediction,
                                        double *scores,
                                        size_t scores_len);

// Default sifting controls.
struct SsvepSiftConfig ssvep_sift_config_default(void);

// Decomposes `signal` into IMFs. `config` may be null for defaults.
//
// # Safety
// `signal` must hold `len` values; `out_set` must be valid.
enum SsvepStatus ssvep_emd_sift(const double *signal,
                                size_t len,
                                double fs_hz,
                                const struct SsvepSiftConfig *config,
                                struct SsvepImfSet **out_set);

// # Safety
// `set` must come from `ssvep_emd_sift`. Null is ignored.
void ssvep_imfs_free(struct SsvepImfSet *set);

// Number of IMFs, excluding the residue. Zero for a null handle.
//
// # Safety
// `set` must be a live handle or null.
size_t ssvep_imfs_count(const struct SsvepImfSet *set);

// Samples per component. Zero for a null handle.
//
// # Safety
// `set` must be a live handle or null.
size_t ssvep_imfs_signal_len(const struct SsvepImfSet *set);

// Copies component `index` into `buf`. Index `count` is the residue.
//
// # Safety
// `buf` must be valid for `len` writes.
enum SsvepStatus ssvep_imfs_copy(const struct SsvepImfSet *set,
                                 size_t index,
                                 double *buf,
                                 size_t len);

// Information transfer rate in bits per minute.
//
// # Safety
// `bits_per_min` must be valid.
enum SsvepStatus ssvep_itr(double accuracy,
                           size_t n_classes,
                           double t_total_s,
                           double *bits_per_min);

// Two-sided paired t-test on `a` and `b`, each of length `n`.
//
// # Safety
// `a` and `b` must hold `n` values; `t` and `p` must be valid.
enum SsvepStatus ssvep_paired_ttest(const double *a,
                                    const double *b,
                                    size_t n,
                                    double *t,
                                    double *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSVEP_CSTL_H */
