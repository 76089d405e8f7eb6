#ifndef YAMABE_LAB_H
#define YAMABE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum YlStatus {
  YL_STATUS_OK = 0,
  YL_STATUS_NULL_POINTER = 1,
  YL_STATUS_INVALID_INPUT = 2,
  YL_STATUS_NOT_CONVERGED = 3,
  YL_STATUS_NEUMANN_VIOLATED = 4,
  YL_STATUS_SINGULAR_TIME = 5,
  YL_STATUS_NOT_YAMABE_METRIC = 6,
  YL_STATUS_PARSE = 7,
  YL_STATUS_BUFFER_TOO_SMALL = 8,
  YL_STATUS_PANIC = 9,
  YL_STATUS_IO = 10,
} YlStatus;

// A rotationally symmetric metric `h² dr² + f² g_S`.
typedef struct YlMetric YlMetric;

// Both sides of the evolution formula for one case and exponent.
typedef struct YlReport YlReport;

// A solution of the constrained Euler-Lagrange problem.
typedef struct YlSolution YlSolution;

// Scalar fields of a report.
typedef struct YlReportSummary {
  double y;
  double lhs;
  double rhs;
  double rel_error;
  bool equality_case;
  bool trusted;
  bool passed;
} YlReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library on this thread.
const char *yl_last_error(void);

// Unit-volume cylinder `[0, L] × S^{n-1}(radius)` on `intervals` cells.
//
// # Safety
// `out` must be valid for writes of a pointer.
enum YlStatus yl_metric_cylinder(uintptr_t n,
                                 uintptr_t intervals,
                                 double radius,
                                 struct YlMetric **out);

// Unit-volume round hemisphere.
//
// # Safety
// `out` must be valid for writes of a pointer.
enum YlStatus yl_metric_hemisphere(uintptr_t n, uintptr_t intervals, struct YlMetric **out);

// Unit-volume tube with `f = 1 + amplitude cos(2πr)` and minimal boundary.
//
// # Safety
// `out` must be valid for writes of a pointer.
enum YlStatus yl_metric_perturbed_cylinder(uintptr_t n,
                                           uintptr_t intervals,
                                           double amplitude,
                                           struct YlMetric **out);

// Metric from its JSON form `{"n", "domain", "h", "f"}`.
//
// # Safety
// `json` must be a nul-terminated string and `out` valid for writes of a pointer.
enum YlStatus yl_metric_from_json(const char *json, struct YlMetric **out);

// # Safety
// `m` must be null or a handle from this library, not yet freed.
void yl_metric_free(struct YlMetric *m);

// Number of radial nodes, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
uintptr_t yl_metric_len(const struct YlMetric *m);

// Scalar curvature at every node into `buf` (at least `yl_metric_len` values).
//
// # Safety
// `m` must be a live handle and `buf` valid for writes of `len` doubles.
enum YlStatus yl_metric_scalar_curvature(const struct YlMetric *m, double *buf, uintptr_t len);

// Solves the constrained problem at exponent `p` from `u = 1`.
//
// # Safety
// `m` must be a live handle and `out` valid for writes of a pointer.
enum YlStatus yl_solve(const struct YlMetric *m, double p, struct YlSolution **out);

// # Safety
// `s` must be a live handle and `y` valid for writes.
enum YlStatus yl_solution_y(const struct YlSolution *s, double *y);

// The solution field at every node into `buf`.
//
// # Safety
// `s` must be a live handle and `buf` valid for writes of `len` doubles.
enum YlStatus yl_solution_u(const struct YlSolution *s, double *buf, uintptr_t len);

// # Safety
// `s` must be null or a handle from this library, not yet freed.
void yl_solution_free(struct YlSolution *s);

// Checks the evolution formula for a geometry given as JSON, e.g.
// `{"kind": "perturbed_cylinder", "amplitude": 0.05}`. A non-positive `dt`
// selects the default step.
//
// # Safety
// `geometry` must be a nul-terminated string and `out` valid for writes of a pointer.
enum YlStatus yl_verify(const char *geometry,
                        uintptr_t n,
                        uintptr_t intervals,
                        double p,
                        double dt,
                        struct YlReport **out);

// # Safety
// `r` must be a live handle and `out` valid for writes.
enum YlStatus yl_report_summary(const struct YlReport *r, struct YlReportSummary *out);

// The full report as JSON; release with [`yl_string_free`].
//
// # Safety
// `r` must be a live handle and `out` valid for writes of a pointer.
enum YlStatus yl_report_json(const struct YlReport *r, char **out);

// # Safety
// `r` must be null or a handle from this library, not yet freed.
void yl_report_free(struct YlReport *r);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void yl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YAMABE_LAB_H */
