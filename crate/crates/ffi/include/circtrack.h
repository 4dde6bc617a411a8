#ifndef CIRCTRACK_H
#define CIRCTRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtEstimatorMode {
  CT_ESTIMATOR_MODE_SENSOR = 0,
  CT_ESTIMATOR_MODE_ORACLE = 1,
} CtEstimatorMode;

// Result code of every fallible call.
typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_ARGUMENT = 2,
  // Malformed or inconsistent scenario configuration.
  CT_STATUS_CONFIG = 3,
  // A camera does not see the line at the start pose.
  CT_STATUS_INITIAL_VISIBILITY = 4,
  // The three detections are collinear.
  CT_STATUS_STRAIGHT_LINE = 5,
  // The line was lost for longer than the hold budget.
  CT_STATUS_SENSOR_LOSS = 6,
  // The control input matrix is rank deficient.
  CT_STATUS_RANK_DEFICIENT = 7,
  // The errors never settle inside the convergence band.
  CT_STATUS_NOT_CONVERGED = 8,
  CT_STATUS_IO = 9,
  // A Rust panic was caught at the boundary.
  CT_STATUS_INTERNAL = 10,
} CtStatus;

// Opaque scenario configuration.
typedef struct CtScenario CtScenario;

// Opaque full-rate simulation trace.
typedef struct CtTrace CtTrace;

typedef struct CtGains {
  double k1;
  double k2;
  double k3;
  double phi;
} CtGains;

// One control period of a trace; field order matches the CSV columns.
typedef struct CtTraceRow {
  double t;
  double true_x;
  double true_y;
  double true_theta;
  double o_cam_x;
  double o_cam_y;
  double e1;
  double e2;
  double e3;
  double s1;
  double s2;
  double s3;
  double v;
  double w;
  double w_rw;
  double w_lw;
  double lyapunov;
  // NaN when camera 2 has no detection.
  double e_cam;
} CtTraceRow;

typedef struct CtPoint {
  double x;
  double y;
} CtPoint;

typedef struct CtCircle {
  struct CtPoint center;
  double radius;
} CtCircle;

// Centre-to-wheel distance `b`, wheel radius `r` and tracking radius `radius` (m).
typedef struct CtRobotParams {
  double b;
  double r;
  double radius;
} CtRobotParams;

typedef struct CtCommand {
  double v;
  double w;
} CtCommand;

typedef struct CtWheelSpeeds {
  double w_rw;
  double w_lw;
} CtWheelSpeeds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty after a
// successful call. Valid until the next call into this library on the same
// thread.
const char *ct_last_error(void);

// Library version as a static NUL-terminated string.
const char *ct_version(void);

// Creates a built-in scenario by name (`paper-a`, `paper-b1`, ...).
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum CtStatus ct_scenario_builtin(const char *name, struct CtScenario **out);

// Parses a scenario from TOML text; omitted fields take their defaults.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum CtStatus ct_scenario_from_toml(const char *toml, struct CtScenario **out);

// # Safety
// `scenario` must come from this library and not be used afterwards.
void ct_scenario_free(struct CtScenario *scenario);

// # Safety
// `scenario` must be a live handle and `gains` a valid pointer.
enum CtStatus ct_scenario_set_gains(struct CtScenario *scenario, const struct CtGains *gains);

// # Safety
// `scenario` must be a live handle.
enum CtStatus ct_scenario_set_mode(struct CtScenario *scenario, enum CtEstimatorMode mode);

// # Safety
// `scenario` must be a live handle.
enum CtStatus ct_scenario_set_duration(struct CtScenario *scenario, double t_end);

// # Safety
// `scenario` must be a live handle.
enum CtStatus ct_scenario_set_seed(struct CtScenario *scenario, uint64_t seed);

// Runs the scenario to completion.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum CtStatus ct_run(const struct CtScenario *scenario, struct CtTrace **out);

// # Safety
// `trace` must come from [`ct_run`] and not be used afterwards.
void ct_trace_free(struct CtTrace *trace);

// Number of rows (one per control period); 0 for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t ct_trace_len(const struct CtTrace *trace);

// # Safety
// `trace` must be a live handle and `out` a valid pointer.
enum CtStatus ct_trace_row(const struct CtTrace *trace, size_t index, struct CtTraceRow *out);

// Earliest time after which all tracking errors stay below `eps` for at
// least `hold` seconds through the end of the trace. Returns
// [`CtStatus::NotConverged`] and writes NaN when there is none.
//
// # Safety
// `trace` must be a live handle and `out` a valid pointer.
enum CtStatus ct_trace_convergence_time(const struct CtTrace *trace,
                                        double eps,
                                        double hold,
                                        double *out);

// Writes the trace, decimated to the scenario's output interval, as CSV.
//
// # Safety
// `trace` must be a live handle and `path` a NUL-terminated string.
enum CtStatus ct_trace_write_csv(const struct CtTrace *trace, const char *path);

// Circle through three points.
//
// # Safety
// `out` must be a valid pointer.
enum CtStatus ct_circumcircle(struct CtPoint p1,
                              struct CtPoint p2,
                              struct CtPoint p3,
                              struct CtCircle *out);

// Sliding-mode command for the tracking errors `(e1, e2, e3)`.
//
// # Safety
// `params`, `gains` and `out` must be valid pointers.
enum CtStatus ct_control(double e1,
                         double e2,
                         double e3,
                         const struct CtRobotParams *params,
                         double w_ref,
                         const struct CtGains *gains,
                         struct CtCommand *out);

// Wheel angular speeds for a body command.
//
// # Safety
// `params` and `out` must be valid pointers.
enum CtStatus ct_wheels_from_body(struct CtCommand cmd,
                                  const struct CtRobotParams *params,
                                  struct CtWheelSpeeds *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCTRACK_H */
