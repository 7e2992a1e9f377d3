#ifndef SPIRALDIM_H
#define SPIRALDIM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_NULL_POINTER = 1,
  SD_STATUS_INVALID_UTF8 = 2,
  SD_STATUS_INVALID_SEQUENCE = 3,
  SD_STATUS_INVALID_PARAMETER = 4,
  SD_STATUS_DELTA_TOO_LARGE = 5,
  SD_STATUS_DELTA_TOO_SMALL = 6,
  SD_STATUS_CELL_BUDGET_EXCEEDED = 7,
  SD_STATUS_TOO_FEW_SAMPLES = 8,
  SD_STATUS_NON_POSITIVE_MEASURE = 9,
  SD_STATUS_SAMPLING_TOO_COARSE = 10,
  SD_STATUS_INTEGRATION = 11,
  SD_STATUS_INSUFFICIENT_TURNS = 12,
  SD_STATUS_OUT_OF_DOMAIN = 13,
  SD_STATUS_NON_CONTRACTING = 14,
  SD_STATUS_INVALID_CYCLE = 15,
  SD_STATUS_CONTRADICTORY = 16,
  SD_STATUS_NEAR_INTEGER_AMBIGUITY = 17,
  SD_STATUS_DEGENERATE_SEGMENT = 18,
  SD_STATUS_CONFIG = 19,
  SD_STATUS_OUTPUT = 20,
  SD_STATUS_PANIC = 99,
} SdStatus;

/**
 * Opaque descending ladder of scales.
 */
typedef struct SdLadder SdLadder;

/**
 * Opaque strictly decreasing positive sequence.
 */
typedef struct SdSequence SdSequence;

/**
 * Plain copy of a dimension estimate.
 */
typedef struct SdEstimate {
  double fit;
  double lower;
  double upper;
  double r_squared;
  bool spread_flag;
} SdEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sd_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void sd_string_free(char *s);

/**
 * Validates `len` values as a strictly decreasing positive sequence with
 * nonincreasing gaps.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum SdStatus sd_sequence_from_values(const double *values, size_t len, struct SdSequence **out);

/**
 * `n^(-a)` for `n = 1..=count`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_sequence_power(double a, size_t count, struct SdSequence **out);

/**
 * `ratio^n` for `n = 1..=count`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_sequence_geometric(double ratio, size_t count, struct SdSequence **out);

/**
 * Number of terms; 0 for null.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t sd_sequence_len(const struct SdSequence *seq);

/**
 * # Safety
 * `seq` must be null or a handle not yet freed.
 */
void sd_sequence_free(struct SdSequence *seq);

/**
 * Log-spaced scales from `delta_max` down to `delta_min`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_ladder_new(double delta_min,
                            double delta_max,
                            size_t count,
                            struct SdLadder **out);

/**
 * # Safety
 * `ladder` must be null or a handle not yet freed.
 */
void sd_ladder_free(struct SdLadder *ladder);

/**
 * Lebesgue measure of the δ-neighborhood of the sequence and 0.
 *
 * # Safety
 * `seq` must be a live handle; `out` must be writable.
 */
enum SdStatus sd_measure_1d(const struct SdSequence *seq, double delta, double *out);

/**
 * Box dimension of the sequence over the ladder.
 *
 * # Safety
 * `seq` and `ladder` must be live handles; `out` must be writable.
 */
enum SdStatus sd_sequence_dimension(const struct SdSequence *seq,
                                    const struct SdLadder *ladder,
                                    struct SdEstimate *out);

/**
 * Spiral dimension near a saddle loop of the given codimension.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_saddle_loop_dim(uint32_t codim, double *out);

/**
 * Upper bound on the number of limit cycles born from a polycycle whose
 * spiral trajectories have dimension `d` and ratio `r`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_cyclicity_bound(double d, double r, int64_t *out);

/**
 * Cyclicity of a two-saddle cycle from its hyperbolicity ratio and
 * tangency orders. `k2 = 0` means the second transition is hyperbolic.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdStatus sd_mourtada_epsilon(double r1, uint32_t k1, uint32_t k2, int64_t *out);

/**
 * Runs a TOML scenario, writing its outputs to `out_dir` (or the config's
 * own `outputs.dir` when null). The result record is returned as JSON in
 * `*result_json`, to be freed with [`sd_string_free`].
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string, `out_dir` null or
 * NUL-terminated, and `result_json` writable.
 */
enum SdStatus sd_run_scenario(const char *config_toml, const char *out_dir, char **result_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPIRALDIM_H */
