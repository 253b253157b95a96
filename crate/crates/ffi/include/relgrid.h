#ifndef RELGRID_H
#define RELGRID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_UTF8 = 2,
  RG_STATUS_INVALID_INPUT = 3,
  RG_STATUS_INFEASIBLE = 4,
  RG_STATUS_INTERNAL = 5,
  RG_STATUS_PANIC = 6,
} RgStatus;

// Opaque system model handle.
typedef struct RgModel RgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next relgrid call on the same thread.
const char *rg_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void rg_string_free(char *s);

// Parses and validates a system model.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum RgStatus rg_model_from_json(const char *json, struct RgModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from `rg_model_from_json` and not have been freed.
void rg_model_free(struct RgModel *model);

// Writes the validation report as a JSON array of violations.
//
// # Safety
// `model` must be a live handle; `out_json` must be writable.
enum RgStatus rg_model_validate(const struct RgModel *model, char **out_json);

// Exponential time to failure in years from a uniform draw `u` in (0, 1].
//
// # Safety
// `out_years` must be writable.
enum RgStatus rg_draw_ttf(double lambda_per_year, double u, double *out_years);

// Exponential time to repair in years from a uniform draw `u` in (0, 1].
//
// # Safety
// `out_years` must be writable.
enum RgStatus rg_draw_ttr(double mu_per_year, double u, double *out_years);

// Minimal interrupting component sets of a load point as a JSON array of
// arrays of component ids.
//
// # Safety
// `model` must be a live handle; `load_point` NUL-terminated; `out_json` writable.
enum RgStatus rg_interrupting_sets(const struct RgModel *model,
                                   const char *load_point,
                                   char **out_json);

// Analytic λ, U and r for every radial load point, as JSON.
//
// # Safety
// `model` must be a live handle; `out_json` must be writable.
enum RgStatus rg_load_point_analytic(const struct RgModel *model, char **out_json);

// Monte Carlo estimate as JSON. `scenarios_csv` may be null for a flat year
// with no renewable output; `config_json` holds an MCS configuration.
//
// # Safety
// `model` must be a live handle; strings NUL-terminated; `out_json` writable.
enum RgStatus rg_mcs_run(const struct RgModel *model,
                         const char *scenarios_csv,
                         const char *config_json,
                         char **out_json);

// Scarcity events of a combined capacity-factor series, as JSON.
//
// # Safety
// `cf` must point to `len` readable values; `out_json` must be writable.
enum RgStatus rg_detect_scarcity(const double *cf,
                                 size_t len,
                                 double step_hours,
                                 double threshold,
                                 char **out_json);

// Nearest-rank p-quantile of event durations in hours.
//
// # Safety
// `durations` must point to `len` readable values; `out_hours` must be writable.
enum RgStatus rg_scarcity_percentile(const double *durations,
                                     size_t len,
                                     double p,
                                     double *out_hours);

// Metric recommendation for a decision context, as JSON.
//
// # Safety
// `context` must be NUL-terminated; `out_json` must be writable.
enum RgStatus rg_advise(const char *context, char **out_json);

// Runs a plan file and writes the result as JSON. Returns
// `RG_STATUS_INFEASIBLE` with the result still written when no design
// passes.
//
// # Safety
// `plan_path` must be NUL-terminated; `out_json` must be writable.
enum RgStatus rg_plan(const char *plan_path, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELGRID_H */
