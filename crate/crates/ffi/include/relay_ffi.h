#ifndef RELAY_FFI_H
#define RELAY_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; 2 to 5 match the `relaysim` exit codes.
 */
typedef enum RelayStatus {
  RELAY_STATUS_OK = 0,
  RELAY_STATUS_NULL_POINTER = 1,
  RELAY_STATUS_INVALID_ARGUMENT = 2,
  RELAY_STATUS_NON_THRESHOLD_POLICY = 3,
  /**
   * Bad table bytes, or a table that does not fit the config.
   */
  RELAY_STATUS_TABLE_MISMATCH = 4,
  RELAY_STATUS_INVARIANT_VIOLATION = 5,
  RELAY_STATUS_IO = 6,
  RELAY_STATUS_BUFFER_TOO_SMALL = 7,
  RELAY_STATUS_PANIC = 8,
} RelayStatus;

/**
 * Opaque policy table.
 */
typedef struct RelayPolicyTable RelayPolicyTable;

/**
 * MDP parameters for one device.
 */
typedef struct RelayEnv {
  double pi;
  double mu;
  double cost;
  double benefit;
  double beta;
} RelayEnv;

/**
 * Channel model; see [`relay_channel_default`].
 */
typedef struct RelayChannel {
  double eta;
  double d0;
  double pl_d0_db;
  double shadow_sigma_db;
  double noise_dbm;
  double interference_w;
} RelayChannel;

/**
 * Network-wide results of one simulation.
 */
typedef struct RelaySummary {
  double mean_gain;
  double mean_lambda;
  double mean_rre;
  double negative_utility_fraction;
  uint64_t transfers;
  uint64_t slots;
} RelaySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t relay_last_error(char *buf, size_t len);

/**
 * Solves one MDP and writes its thresholds, one per energy bin (-1 = never
 * relay), into `thresholds`, which must hold `energy_bins` values.
 *
 * # Safety
 * `env` must be valid; `thresholds` valid for `capacity` writes.
 */
enum RelayStatus relay_solve_threshold(const struct RelayEnv *env,
                                       size_t max_tokens,
                                       size_t energy_bins,
                                       double p_max,
                                       double tolerance,
                                       int32_t *thresholds,
                                       size_t capacity);

/**
 * Builds a table over explicit grids.
 *
 * # Safety
 * Each grid pointer must be valid for its length; `out` must be valid.
 */
enum RelayStatus relay_table_build(const double *pi,
                                   size_t n_pi,
                                   const double *mu,
                                   size_t n_mu,
                                   const double *cost,
                                   size_t n_cost,
                                   double beta,
                                   double benefit,
                                   size_t max_tokens,
                                   size_t energy_bins,
                                   double p_max,
                                   double tolerance,
                                   struct RelayPolicyTable **out);

/**
 * Builds the default 9x9x9 table for the given discount factor and budget.
 *
 * # Safety
 * `out` must be valid.
 */
enum RelayStatus relay_table_build_default(double beta,
                                           double p_max,
                                           struct RelayPolicyTable **out);

/**
 * # Safety
 * `bytes` must be valid for `len` bytes; `out` must be valid.
 */
enum RelayStatus relay_table_from_bytes(const uint8_t *bytes,
                                        size_t len,
                                        struct RelayPolicyTable **out);

/**
 * Serializes `table`. Always stores the required size in `needed`; writes
 * into `buf` only when `capacity` suffices.
 *
 * # Safety
 * `table` and `needed` must be valid; `buf` null or valid for `capacity` bytes.
 */
enum RelayStatus relay_table_to_bytes(const struct RelayPolicyTable *table,
                                      uint8_t *buf,
                                      size_t capacity,
                                      size_t *needed);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum RelayStatus relay_table_load(const char *path, struct RelayPolicyTable **out);

/**
 * # Safety
 * `table` must be valid; `path` a NUL-terminated string.
 */
enum RelayStatus relay_table_save(const struct RelayPolicyTable *table, const char *path);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or valid.
 */
size_t relay_table_len(const struct RelayPolicyTable *table);

/**
 * Action (0 decline, 1 relay) for estimates `pi_hat`, `mu_hat`, an offered
 * relay energy `cost` and state `(k, e)`.
 *
 * # Safety
 * `table` and `action` must be valid.
 */
enum RelayStatus relay_table_lookup(const struct RelayPolicyTable *table,
                                    double pi_hat,
                                    double mu_hat,
                                    double cost,
                                    size_t k,
                                    size_t e,
                                    uint8_t *action);

/**
 * # Safety
 * `table` must be null or a handle from this library, not yet freed.
 */
void relay_table_free(struct RelayPolicyTable *table);

/**
 * Relay-energy bin of a remaining budget `p` out of `p_max`.
 */
size_t relay_quantize_energy(double p, double p_max, size_t bins);

/**
 * # Safety
 * `out` must be valid.
 */
enum RelayStatus relay_channel_default(struct RelayChannel *out);

/**
 * Linear gain of a link, or NaN for a null channel.
 *
 * # Safety
 * `ch` must be null or valid.
 */
double relay_link_gain(double distance, double shadow_db, const struct RelayChannel *ch);

double relay_af_sinr(double first_hop, double second_hop);

/**
 * Least relay power meeting `gamma_target`; `feasible` is set to 0 (and
 * `power` left alone) when no power up to `p_max` works.
 *
 * # Safety
 * `ch`, `power` and `feasible` must be valid.
 */
enum RelayStatus relay_min_relay_power(double bs_relay_sinr,
                                       double relay_dest_gain,
                                       const struct RelayChannel *ch,
                                       double gamma_target,
                                       double p_max,
                                       double *power,
                                       uint8_t *feasible);

/**
 * Runs a simulation described by config text (`section.key = value` lines),
 * building the policy tables it needs.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be valid.
 */
enum RelayStatus relay_simulate(const char *config, struct RelaySummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAY_FFI_H */
