#ifndef ATBAT_H
#define ATBAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define ATBAT_ZONE_FAR 17

#define ATBAT_STATE_ON_BASE 12

#define ATBAT_STATE_OUT 13

typedef enum AtbatStatus {
  ATBAT_STATUS_OK = 0,
  ATBAT_STATUS_NULL_POINTER = 1,
  ATBAT_STATUS_INVALID_ARGUMENT = 2,
  ATBAT_STATUS_NOT_FOUND = 3,
  ATBAT_STATUS_INTERNAL = 4,
  ATBAT_STATUS_PANIC = 5,
} AtbatStatus;

/*
 One solved matchup.
 */
typedef struct AtbatSolution AtbatSolution;

/*
 A trained store opened for solving.
 */
typedef struct AtbatStore AtbatStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *atbat_last_error(void);

/*
 Zone index of a plate location (feet) on the default grid.

 # Safety
 `zone_out` must be valid for writes.
 */
enum AtbatStatus atbat_zone_of(double x, double z, int32_t *zone_out);

/*
 State reached from a count after a labeled pitch. `label` is one of
 called_strike, ball, whiff, foul, hit, out_in_play.

 # Safety
 `label` must be a NUL-terminated string and `state_out` valid for writes.
 */
enum AtbatStatus atbat_next_state(uint8_t balls,
                                  uint8_t strikes,
                                  const char *label,
                                  int32_t *state_out);

/*
 Solves a zero-sum matrix game. `payoff` is row-major `rows x cols`; rows
 maximize. `cap` in (0, 1] bounds each column probability; pass 0 for no
 cap. The mix outputs may be NULL when not wanted.

 # Safety
 `payoff` must hold `rows * cols` doubles, `row_mix_out` `rows` and
 `col_mix_out` `cols` writable doubles when not NULL.
 */
enum AtbatStatus atbat_matrix_game_solve(const double *payoff,
                                         uintptr_t rows,
                                         uintptr_t cols,
                                         double cap,
                                         double *value_out,
                                         double *row_mix_out,
                                         double *col_mix_out);

/*
 Opens a trained store. Configuration comes from the `ATBAT_*`
 environment, with the store directory taken from `path`.

 # Safety
 `path` must be a NUL-terminated string and `store_out` valid for writes.
 */
enum AtbatStatus atbat_store_open(const char *path, struct AtbatStore **store_out);

/*
 # Safety
 `store` must come from `atbat_store_open` and not be used afterwards.
 */
void atbat_store_free(struct AtbatStore *store);

/*
 Solves one matchup. `overrides_json` may be NULL, or a JSON object with
 any of excluded_pitch_types, threshold, cap and variance_scale.

 # Safety
 `store` must be a live handle, the strings NUL-terminated, and
 `solution_out` valid for writes.
 */
enum AtbatStatus atbat_solve_matchup(const struct AtbatStore *store,
                                     const char *pitcher_id,
                                     const char *batter_id,
                                     const char *overrides_json,
                                     struct AtbatSolution **solution_out);

/*
 Equilibrium on-base probability from a count.

 # Safety
 `solution` must be a live handle and `value_out` valid for writes.
 */
enum AtbatStatus atbat_solution_value(const struct AtbatSolution *solution,
                                      uint8_t balls,
                                      uint8_t strikes,
                                      double *value_out);

/*
 The full solve response as JSON. Free the string with `atbat_string_free`.

 # Safety
 `solution` must be a live handle and `json_out` valid for writes.
 */
enum AtbatStatus atbat_solution_to_json(const struct AtbatSolution *solution, char **json_out);

/*
 # Safety
 `solution` must come from `atbat_solve_matchup` and not be used afterwards.
 */
void atbat_solution_free(struct AtbatSolution *solution);

/*
 # Safety
 `s` must be a string returned by this library, freed at most once.
 */
void atbat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATBAT_H */
