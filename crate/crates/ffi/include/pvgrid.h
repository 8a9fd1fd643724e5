#ifndef PVGRID_H
#define PVGRID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PVG_FLAG_Q_SATURATED 1

#define PVG_FLAG_D_SATURATED 2

#define PVG_FLAG_INFEASIBLE 4

#define PVG_FLAG_BUS_FAULT 8

typedef enum PvgStatus {
  PVG_STATUS_OK = 0,
  PVG_STATUS_NULL_ARGUMENT = 1,
  PVG_STATUS_INVALID_UTF8 = 2,
  PVG_STATUS_PARSE = 3,
  PVG_STATUS_INVALID_SCENARIO = 4,
  /**
   * The run stopped early; the partial run is still returned.
   */
  PVG_STATUS_RUN_FAULT = 5,
  PVG_STATUS_OUT_OF_RANGE = 6,
  PVG_STATUS_IO = 7,
  /**
   * Demand could not be met; the output holds the load-shedding dispatch.
   */
  PVG_STATUS_INFEASIBLE = 8,
  PVG_STATUS_PANIC = 9,
} PvgStatus;

typedef enum PvgPvMode {
  PVG_PV_MODE_MPPT = 0,
  PVG_PV_MODE_POWER_REFERENCE = 1,
} PvgPvMode;

typedef enum PvgCase {
  PVG_CASE_OTHER = 0,
  PVG_CASE_CASE1 = 1,
  PVG_CASE_CASE2 = 2,
  PVG_CASE_CASE3 = 3,
  PVG_CASE_CASE4 = 4,
  PVG_CASE_CASE5 = 5,
} PvgCase;

/**
 * Result of a simulation run.
 */
typedef struct PvgRun PvgRun;

/**
 * Parsed scenario.
 */
typedef struct PvgScenario PvgScenario;

/**
 * One logged step. Powers in kW, voltages in V, currents in A.
 */
typedef struct PvgRecord {
  double t;
  double irradiance;
  double p_pv;
  double v_pv;
  double i_pv;
  double v_pv_ref;
  enum PvgPvMode pv_mode;
  double p_pv_ref;
  double p_bat;
  double p_bat_ref;
  double soc;
  double p_load;
  double p_grid;
  double p_grid_set;
  double q_grid;
  double q_set;
  double v_dc;
  double balance_residual;
  enum PvgCase case_label;
  /**
   * Bitwise OR of the `PVG_FLAG_*` constants.
   */
  uint32_t flags;
} PvgRecord;

/**
 * Inputs to a single dispatch decision.
 */
typedef struct PvgDispatchInput {
  double p_mpp_available;
  double p_load;
  /**
   * Requested export (kW). Ignored when `absorb_max` is set.
   */
  double p_request;
  bool absorb_max;
  double q_request;
  double p_import_limit;
  double p_export_limit;
  double soc;
} PvgDispatchInput;

typedef struct PvgDispatch {
  enum PvgPvMode pv_mode;
  double p_pv_ref;
  double p_bat_ref;
  double p_grid_set;
  double q_set;
  double load_shed;
  enum PvgCase case_label;
} PvgDispatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *pvg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pvg_version(void);

/**
 * Parse a scenario file held in `text`.
 *
 * # Safety
 * `text` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum PvgStatus pvg_scenario_from_str(const char *text, struct PvgScenario **out);

/**
 * Built-in reference scenario `number` (1 to 5).
 *
 * # Safety
 * `out` must be NULL or writable.
 */
enum PvgStatus pvg_scenario_preset(uint32_t number, struct PvgScenario **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle from this library not yet freed.
 */
void pvg_scenario_free(struct PvgScenario *scenario);

/**
 * Simulate `scenario`. On `PVG_STATUS_RUN_FAULT` `*out` still receives the
 * records logged before the fault.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be NULL or writable.
 */
enum PvgStatus pvg_run(const struct PvgScenario *scenario, struct PvgRun **out);

/**
 * Number of logged records, 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t pvg_run_len(const struct PvgRun *run);

/**
 * Copy record `index` into `*out`.
 *
 * # Safety
 * `run` must be a live handle; `out` must be NULL or writable.
 */
enum PvgStatus pvg_run_record(const struct PvgRun *run, size_t index, struct PvgRecord *out);

/**
 * Write the run as CSV to `path`.
 *
 * # Safety
 * `run` must be a live handle; `path` a NUL-terminated string.
 */
enum PvgStatus pvg_run_write_csv(const struct PvgRun *run, const char *path);

/**
 * # Safety
 * `run` must be NULL or a handle from this library not yet freed.
 */
void pvg_run_free(struct PvgRun *run);

/**
 * One dispatch decision with the battery of `scenario`. Returns
 * `PVG_STATUS_INFEASIBLE` with the load-shedding dispatch in `*out` when
 * demand cannot be met.
 *
 * # Safety
 * `scenario` must be a live handle; `input` readable; `out` writable.
 */
enum PvgStatus pvg_dispatch(const struct PvgScenario *scenario,
                            const struct PvgDispatchInput *input,
                            struct PvgDispatch *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PVGRID_H */
