//! C interface to yamabe-lab.
//!
//! Every function returns a [`YlStatus`]; on failure the message is available
//! from [`yl_last_error`] on the same thread until the next call. Objects are
//! opaque handles created by the constructors below and released with the
//! matching `yl_*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use yamabe_lab::theorem::{verify_theorem_b, Case, Geometry, TheoremBReport, VerifyOptions};
use yamabe_lab::warped::{warped_curvature, WarpedMetric};
use yamabe_lab::yamabe::{solve_subcritical, SubcriticalProblem, YamabeSolution};
use yamabe_lab::LabError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotConverged = 3,
    NeumannViolated = 4,
    SingularTime = 5,
    NotYamabeMetric = 6,
    Parse = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Io = 10,
}

/// A rotationally symmetric metric `h² dr² + f² g_S`.
pub struct YlMetric(WarpedMetric);

/// A solution of the constrained Euler-Lagrange problem.
pub struct YlSolution(YamabeSolution);

/// Both sides of the evolution formula for one case and exponent.
pub struct YlReport(TheoremBReport);

/// Scalar fields of a report.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct YlReportSummary {
    pub y: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub equality_case: bool,
    pub trusted: bool,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(YlStatus, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let status = match e {
            LabError::InvalidInput(_)
            | LabError::NotPositiveDefinite { .. }
            | LabError::Singular(_)
            | LabError::Config(_) => YlStatus::InvalidInput,
            LabError::NotConverged { .. } | LabError::PositivityLost { .. } => {
                YlStatus::NotConverged
            }
            LabError::NeumannViolated { .. } => YlStatus::NeumannViolated,
            LabError::SingularTime { .. } | LabError::BoundaryDrift { .. } => {
                YlStatus::SingularTime
            }
            LabError::NotYamabeMetric(_) => YlStatus::NotYamabeMetric,
            LabError::Json(_) | LabError::Csv(_) => YlStatus::Parse,
            LabError::Io { .. } => YlStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(YlStatus::NullPointer, format!("{what} is null"))
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior nul removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> YlStatus {
    set_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => YlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(Some(format!("panic: {msg}")));
            YlStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` must be null or valid for writes of a pointer.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `buf` must be null or valid for writes of `len` doubles.
unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err(Failure(
            YlStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// # Safety
/// `s` must be null or a nul-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(YlStatus::InvalidInput, format!("{what} is not UTF-8: {e}")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn yl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Unit-volume cylinder `[0, L] × S^{n-1}(radius)` on `intervals` cells.
///
/// # Safety
/// `out` must be valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_cylinder(
    n: usize,
    intervals: usize,
    radius: f64,
    out: *mut *mut YlMetric,
) -> YlStatus {
    guard(|| {
        emit(
            out,
            YlMetric(WarpedMetric::unit_volume_cylinder(n, intervals, radius)?),
        )
    })
}

/// Unit-volume round hemisphere.
///
/// # Safety
/// `out` must be valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_hemisphere(
    n: usize,
    intervals: usize,
    out: *mut *mut YlMetric,
) -> YlStatus {
    guard(|| {
        emit(
            out,
            YlMetric(WarpedMetric::unit_volume_hemisphere(n, intervals)?),
        )
    })
}

/// Unit-volume tube with `f = 1 + amplitude cos(2πr)` and minimal boundary.
///
/// # Safety
/// `out` must be valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_perturbed_cylinder(
    n: usize,
    intervals: usize,
    amplitude: f64,
    out: *mut *mut YlMetric,
) -> YlStatus {
    guard(|| {
        emit(
            out,
            YlMetric(WarpedMetric::perturbed_cylinder(n, intervals, amplitude)?),
        )
    })
}

/// Metric from its JSON form `{"n", "domain", "h", "f"}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_from_json(
    json: *const c_char,
    out: *mut *mut YlMetric,
) -> YlStatus {
    guard(|| emit(out, YlMetric(WarpedMetric::from_json(text(json, "json")?)?)))
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_free(m: *mut YlMetric) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of radial nodes, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_len(m: *const YlMetric) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Scalar curvature at every node into `buf` (at least `yl_metric_len` values).
///
/// # Safety
/// `m` must be a live handle and `buf` valid for writes of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn yl_metric_scalar_curvature(
    m: *const YlMetric,
    buf: *mut f64,
    len: usize,
) -> YlStatus {
    guard(|| {
        let m = borrow(m, "metric")?;
        copy_out(&warped_curvature(&m.0)?.scalar, buf, len)
    })
}

/// Solves the constrained problem at exponent `p` from `u = 1`.
///
/// # Safety
/// `m` must be a live handle and `out` valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_solve(
    m: *const YlMetric,
    p: f64,
    out: *mut *mut YlSolution,
) -> YlStatus {
    guard(|| {
        let m = borrow(m, "metric")?;
        let problem = SubcriticalProblem::new(m.0.clone(), p)?;
        emit(out, YlSolution(solve_subcritical(&problem, None)?))
    })
}

/// # Safety
/// `s` must be a live handle and `y` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn yl_solution_y(s: *const YlSolution, y: *mut f64) -> YlStatus {
    guard(|| {
        let s = borrow(s, "solution")?;
        if y.is_null() {
            return Err(null("y"));
        }
        *y = s.0.y;
        Ok(())
    })
}

/// The solution field at every node into `buf`.
///
/// # Safety
/// `s` must be a live handle and `buf` valid for writes of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn yl_solution_u(
    s: *const YlSolution,
    buf: *mut f64,
    len: usize,
) -> YlStatus {
    guard(|| copy_out(&borrow(s, "solution")?.0.u, buf, len))
}

/// # Safety
/// `s` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn yl_solution_free(s: *mut YlSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Checks the evolution formula for a geometry given as JSON, e.g.
/// `{"kind": "perturbed_cylinder", "amplitude": 0.05}`. A non-positive `dt`
/// selects the default step.
///
/// # Safety
/// `geometry` must be a nul-terminated string and `out` valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_verify(
    geometry: *const c_char,
    n: usize,
    intervals: usize,
    p: f64,
    dt: f64,
    out: *mut *mut YlReport,
) -> YlStatus {
    guard(|| {
        let geometry: Geometry = parse_geometry(text(geometry, "geometry")?)?;
        let case = Case::new(geometry, n, intervals);
        let dt = (dt > 0.0).then_some(dt);
        emit(
            out,
            YlReport(verify_theorem_b(&case, p, dt, &VerifyOptions::default())?),
        )
    })
}

fn parse_geometry(s: &str) -> Result<Geometry, Failure> {
    let g: Geometry = serde_json::from_str(s).map_err(LabError::from)?;
    g.validate()?;
    Ok(g)
}

/// # Safety
/// `r` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn yl_report_summary(
    r: *const YlReport,
    out: *mut YlReportSummary,
) -> YlStatus {
    guard(|| {
        let r = &borrow(r, "report")?.0;
        if out.is_null() {
            return Err(null("summary"));
        }
        *out = YlReportSummary {
            y: r.y,
            lhs: r.lhs_fd,
            rhs: r.rhs_total,
            rel_error: r.rel_error,
            equality_case: r.equality_case,
            trusted: r.trusted,
            passed: r.passed,
        };
        Ok(())
    })
}

/// The full report as JSON; release with [`yl_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` valid for writes of a pointer.
#[no_mangle]
pub unsafe extern "C" fn yl_report_json(r: *const YlReport, out: *mut *mut c_char) -> YlStatus {
    guard(|| {
        let json = borrow(r, "report")?.0.to_json()?;
        if out.is_null() {
            return Err(null("output string"));
        }
        *out = CString::new(json).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn yl_report_free(r: *mut YlReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn yl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
