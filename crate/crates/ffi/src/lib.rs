//! C ABI over the `circtrack` simulator.
//!
//! Scenarios and traces are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`CtStatus`];
//! the message of the last failure on the calling thread is available from
//! [`ct_last_error`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use circtrack::controller::{control, ControlError};
use circtrack::geometry::circumcircle;
use circtrack::metrics::{convergence_time, Convergence};
use circtrack::plant::wheels_from_body;
use circtrack::scenario::ConfigError;
use circtrack::trace::write_csv;
use circtrack::{
    run_scenario, ControlCommand, ErrorState, EstimatorMode, Gains, Point2D, RobotParams,
    ScenarioConfig, SimError, Trace, TraceRow,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or inconsistent scenario configuration.
    Config = 3,
    /// A camera does not see the line at the start pose.
    InitialVisibility = 4,
    /// The three detections are collinear.
    StraightLine = 5,
    /// The line was lost for longer than the hold budget.
    SensorLoss = 6,
    /// The control input matrix is rank deficient.
    RankDeficient = 7,
    /// The errors never settle inside the convergence band.
    NotConverged = 8,
    Io = 9,
    /// A Rust panic was caught at the boundary.
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtEstimatorMode {
    Sensor = 0,
    Oracle = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CtPoint {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CtCircle {
    pub center: CtPoint,
    pub radius: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CtCommand {
    pub v: f64,
    pub w: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CtWheelSpeeds {
    pub w_rw: f64,
    pub w_lw: f64,
}

/// Centre-to-wheel distance `b`, wheel radius `r` and tracking radius `radius` (m).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtRobotParams {
    pub b: f64,
    pub r: f64,
    pub radius: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub phi: f64,
}

/// One control period of a trace; field order matches the CSV columns.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CtTraceRow {
    pub t: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_theta: f64,
    pub o_cam_x: f64,
    pub o_cam_y: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub v: f64,
    pub w: f64,
    pub w_rw: f64,
    pub w_lw: f64,
    pub lyapunov: f64,
    /// NaN when camera 2 has no detection.
    pub e_cam: f64,
}

/// Opaque scenario configuration.
pub struct CtScenario {
    cfg: ScenarioConfig,
}

/// Opaque full-rate simulation trace.
pub struct CtTrace {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: CtStatus, msg: impl Into<String>) -> CtStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting a panic into [`CtStatus::Internal`].
fn guard(f: impl FnOnce() -> CtStatus) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == CtStatus::Ok {
                set_error("");
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            fail(CtStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

fn config_status(e: ConfigError) -> CtStatus {
    fail(CtStatus::Config, e.to_string())
}

fn sim_status(e: SimError) -> CtStatus {
    let status = match &e {
        SimError::Config(_) => CtStatus::Config,
        SimError::InitialVisibility { .. } | SimError::DegenerateInitialHeading => {
            CtStatus::InitialVisibility
        }
        SimError::StraightLineDetected { .. } => CtStatus::StraightLine,
        SimError::SensorLoss { .. } => CtStatus::SensorLoss,
    };
    fail(status, e.to_string())
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, CtStatus> {
    if s.is_null() {
        return Err(fail(CtStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CtStatus::InvalidArgument, "string argument is not UTF-8"))
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(CtStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(CtStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

/// Message describing the last failure on this thread; empty after a
/// successful call. Valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn boxed_scenario(cfg: ScenarioConfig, out: &mut *mut CtScenario) -> CtStatus {
    *out = Box::into_raw(Box::new(CtScenario { cfg }));
    CtStatus::Ok
}

/// Creates a built-in scenario by name (`paper-a`, `paper-b1`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_builtin(
    name: *const c_char,
    out: *mut *mut CtScenario,
) -> CtStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let name = match c_str(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        match ScenarioConfig::builtin(name) {
            Ok(cfg) => boxed_scenario(cfg, out),
            Err(e) => config_status(e),
        }
    })
}

/// Parses a scenario from TOML text; omitted fields take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut CtScenario,
) -> CtStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let text = match c_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_toml_str(text) {
            Ok(cfg) => boxed_scenario(cfg, out),
            Err(e) => config_status(e),
        }
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_free(scenario: *mut CtScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle and `gains` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_set_gains(
    scenario: *mut CtScenario,
    gains: *const CtGains,
) -> CtStatus {
    guard(|| {
        let s = deref_mut!(scenario);
        let g = deref!(gains);
        let gains = Gains {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            phi: g.phi,
        };
        if let Err(msg) = gains.validate() {
            return fail(CtStatus::InvalidArgument, msg);
        }
        s.cfg.gains = gains;
        CtStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_set_mode(
    scenario: *mut CtScenario,
    mode: CtEstimatorMode,
) -> CtStatus {
    guard(|| {
        let s = deref_mut!(scenario);
        s.cfg.estimator_mode = match mode {
            CtEstimatorMode::Sensor => EstimatorMode::Sensor,
            CtEstimatorMode::Oracle => EstimatorMode::Oracle,
        };
        CtStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_set_duration(
    scenario: *mut CtScenario,
    t_end: f64,
) -> CtStatus {
    guard(|| {
        let s = deref_mut!(scenario);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return fail(
                CtStatus::InvalidArgument,
                format!("t_end must be positive, got {t_end}"),
            );
        }
        s.cfg.t_end = t_end;
        CtStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_scenario_set_seed(scenario: *mut CtScenario, seed: u64) -> CtStatus {
    guard(|| {
        deref_mut!(scenario).cfg.seed = seed;
        CtStatus::Ok
    })
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_run(scenario: *const CtScenario, out: *mut *mut CtTrace) -> CtStatus {
    guard(|| {
        let out = deref_mut!(out);
        *out = ptr::null_mut();
        let s = deref!(scenario);
        match run_scenario(&s.cfg) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(CtTrace { trace }));
                CtStatus::Ok
            }
            Err(e) => sim_status(e),
        }
    })
}

/// # Safety
/// `trace` must come from [`ct_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ct_trace_free(trace: *mut CtTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of rows (one per control period); 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_trace_len(trace: *const CtTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.rows.len())
}

fn c_row(r: &TraceRow) -> CtTraceRow {
    CtTraceRow {
        t: r.t,
        true_x: r.true_pose.x,
        true_y: r.true_pose.y,
        true_theta: r.true_pose.theta,
        o_cam_x: r.o_cam.x,
        o_cam_y: r.o_cam.y,
        e1: r.e.e1,
        e2: r.e.e2,
        e3: r.e.e3,
        s1: r.s.s1,
        s2: r.s.s2,
        s3: r.s.s3,
        v: r.cmd.v,
        w: r.cmd.w,
        w_rw: r.wheels.w_rw,
        w_lw: r.wheels.w_lw,
        lyapunov: r.v_lyap,
        e_cam: r.e_cam,
    }
}

/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_trace_row(
    trace: *const CtTrace,
    index: usize,
    out: *mut CtTraceRow,
) -> CtStatus {
    guard(|| {
        let t = deref!(trace);
        let out = deref_mut!(out);
        match t.trace.rows.get(index) {
            Some(r) => {
                *out = c_row(r);
                CtStatus::Ok
            }
            None => fail(
                CtStatus::InvalidArgument,
                format!("row {index} out of range (len {})", t.trace.rows.len()),
            ),
        }
    })
}

/// Earliest time after which all tracking errors stay below `eps` for at
/// least `hold` seconds through the end of the trace. Returns
/// [`CtStatus::NotConverged`] and writes NaN when there is none.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_trace_convergence_time(
    trace: *const CtTrace,
    eps: f64,
    hold: f64,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let t = deref!(trace);
        let out = deref_mut!(out);
        if !(eps > 0.0) || !(hold >= 0.0) {
            return fail(CtStatus::InvalidArgument, "need eps > 0 and hold >= 0");
        }
        match convergence_time(&t.trace.rows, eps, hold) {
            Convergence::At(time) => {
                *out = time;
                CtStatus::Ok
            }
            Convergence::NotConverged => {
                *out = f64::NAN;
                fail(CtStatus::NotConverged, "tracking errors did not converge")
            }
        }
    })
}

/// Writes the trace, decimated to the scenario's output interval, as CSV.
///
/// # Safety
/// `trace` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ct_trace_write_csv(
    trace: *const CtTrace,
    path: *const c_char,
) -> CtStatus {
    guard(|| {
        let t = deref!(trace);
        let path = match c_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let result = File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_csv(&mut w, t.trace.decimated())?;
            w.flush()
        });
        match result {
            Ok(()) => CtStatus::Ok,
            Err(e) => fail(CtStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Circle through three points.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ct_circumcircle(
    p1: CtPoint,
    p2: CtPoint,
    p3: CtPoint,
    out: *mut CtCircle,
) -> CtStatus {
    guard(|| {
        let out = deref_mut!(out);
        let p = |q: CtPoint| Point2D::new(q.x, q.y);
        match circumcircle(p(p1), p(p2), p(p3)) {
            Ok(c) => {
                *out = CtCircle {
                    center: CtPoint {
                        x: c.center.x,
                        y: c.center.y,
                    },
                    radius: c.radius,
                };
                CtStatus::Ok
            }
            Err(e) => fail(CtStatus::StraightLine, e.to_string()),
        }
    })
}

/// Sliding-mode command for the tracking errors `(e1, e2, e3)`.
///
/// # Safety
/// `params`, `gains` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ct_control(
    e1: f64,
    e2: f64,
    e3: f64,
    params: *const CtRobotParams,
    w_ref: f64,
    gains: *const CtGains,
    out: *mut CtCommand,
) -> CtStatus {
    guard(|| {
        let p = deref!(params);
        let g = deref!(gains);
        let out = deref_mut!(out);
        let params = RobotParams {
            b: p.b,
            r: p.r,
            radius: p.radius,
        };
        let gains = Gains {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            phi: g.phi,
        };
        if let Err(msg) = params.validate().and_then(|()| gains.validate()) {
            return fail(CtStatus::InvalidArgument, msg);
        }
        match control(&ErrorState::new(e1, e2, e3), &params, w_ref, &gains) {
            Ok(u) => {
                *out = CtCommand { v: u.v, w: u.w };
                CtStatus::Ok
            }
            Err(e @ ControlError::RankDeficient(_)) => fail(CtStatus::RankDeficient, e.to_string()),
        }
    })
}

/// Wheel angular speeds for a body command.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ct_wheels_from_body(
    cmd: CtCommand,
    params: *const CtRobotParams,
    out: *mut CtWheelSpeeds,
) -> CtStatus {
    guard(|| {
        let p = deref!(params);
        let out = deref_mut!(out);
        let params = RobotParams {
            b: p.b,
            r: p.r,
            radius: p.radius,
        };
        if let Err(msg) = params.validate() {
            return fail(CtStatus::InvalidArgument, msg);
        }
        let ws = wheels_from_body(&ControlCommand::new(cmd.v, cmd.w), &params);
        *out = CtWheelSpeeds {
            w_rw: ws.w_rw,
            w_lw: ws.w_lw,
        };
        CtStatus::Ok
    })
}
