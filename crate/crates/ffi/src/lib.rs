//! C ABI for the `crimesim` simulator.
//!
//! Every fallible function returns a [`CrimesimStatus`]; on failure a
//! thread-local message is available through
//! [`crimesim_last_error_message`]. Objects are opaque handles created by
//! `*_new`/`*_load` functions and released by the matching `*_free`.
//! Field buffers use row-major cell order (index `i + nx * j`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use crimesim::integrator::Advance;
use crimesim::io::{load_scenario, read_snapshot, run_scenario, write_snapshot, Scenario};
use crimesim::{
    homogeneous_steady_state, Error, Field, FinalStatus, Grid, ModelParams, SimState, Simulator, StepControl,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrimesimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ValidationError = 4,
    IoError = 5,
    FormatError = 6,
    NumericalError = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// How a simulation currently stands.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrimesimRunState {
    /// The requested time was reached; the simulation can continue.
    Running = 0,
    ReachedT = 1,
    Equilibrated = 2,
    BlowupSuspected = 3,
    Failed = 4,
}

impl From<FinalStatus> for CrimesimRunState {
    fn from(s: FinalStatus) -> Self {
        match s {
            FinalStatus::ReachedT => Self::ReachedT,
            FinalStatus::Equilibrated => Self::Equilibrated,
            FinalStatus::BlowupSuspected => Self::BlowupSuspected,
            FinalStatus::Failed => Self::Failed,
        }
    }
}

/// Model parameters with constant sources.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrimesimParams {
    pub m: f64,
    pub chi: f64,
    pub eps: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Opaque parsed scenario.
pub struct CrimesimScenario {
    inner: Scenario,
}

/// Opaque running simulation.
pub struct CrimesimSim {
    inner: Simulator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> CrimesimStatus {
    match e {
        Error::ScenarioParse { .. } | Error::Csv(_) | Error::Json(_) => CrimesimStatus::ParseError,
        Error::Validation { .. } | Error::InvalidParams { .. } | Error::InvalidControl(_) | Error::InvalidSigma(_) => {
            CrimesimStatus::ValidationError
        }
        Error::Io { .. } => CrimesimStatus::IoError,
        Error::BadMagic { .. }
        | Error::Truncated { .. }
        | Error::MalformedHeader { .. }
        | Error::DimensionMismatch { .. } => CrimesimStatus::FormatError,
        Error::InvalidDimension(_) | Error::GridMismatch | Error::NoSteadyState(_) => CrimesimStatus::InvalidArgument,
        _ => CrimesimStatus::NumericalError,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CrimesimStatus, String)>) -> CrimesimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CrimesimStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CrimesimStatus::Panic
        }
    }
}

fn lift(e: Error) -> (CrimesimStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CrimesimStatus, String) {
    (CrimesimStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (CrimesimStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CrimesimStatus::InvalidArgument, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (CrimesimStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 if there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn crimesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Homogeneous equilibrium `(u*, v*)` for constant sources.
///
/// # Safety
/// `u_out` and `v_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_steady_state(b1: f64, b2: f64, u_out: *mut f64, v_out: *mut f64) -> CrimesimStatus {
    guard(|| {
        let u_out = out_ref(u_out, "u_out")?;
        let v_out = out_ref(v_out, "v_out")?;
        let p = ModelParams::new(1.0, 0.0, b1, b2).map_err(lift)?;
        let (u, v) = homogeneous_steady_state(&p).map_err(lift)?;
        *u_out = u;
        *v_out = v;
        Ok(())
    })
}

/// Parses and validates a TOML scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_scenario_load(
    path: *const c_char,
    out: *mut *mut CrimesimScenario,
) -> CrimesimStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let s = load_scenario(&path_arg(path, "path")?).map_err(lift)?;
        *out = Box::into_raw(Box::new(CrimesimScenario { inner: s }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`crimesim_scenario_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crimesim_scenario_free(s: *mut CrimesimScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs a scenario to completion, writing snapshots, `diagnostics.csv` and
/// `manifest.json` into `out_dir`. `state_out` receives the final status.
///
/// # Safety
/// `s` must be a live scenario handle, `out_dir` a NUL-terminated string and
/// `state_out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_scenario_run(
    s: *const CrimesimScenario,
    out_dir: *const c_char,
    state_out: *mut CrimesimRunState,
) -> CrimesimStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let m = run_scenario(&s.inner, &path_arg(out_dir, "out_dir")?).map_err(lift)?;
        if let Some(o) = state_out.as_mut() {
            *o = m.final_status.into();
        }
        Ok(())
    })
}

/// Creates a simulation from a scenario's grid, model, control and initial data.
///
/// # Safety
/// `s` must be a live scenario handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_from_scenario(
    s: *const CrimesimScenario,
    out: *mut *mut CrimesimSim,
) -> CrimesimStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let s = &s.as_ref().ok_or_else(|| null("scenario"))?.inner;
        let sim =
            Simulator::new(s.initial_state().map_err(lift)?, s.params().map_err(lift)?, s.control).map_err(lift)?;
        *out = Box::into_raw(Box::new(CrimesimSim { inner: sim }));
        Ok(())
    })
}

/// Creates a simulation with gaussian initial data of width `sigma` on the
/// rectangle `bounds = {x_min, x_max, y_min, y_max}` and default step control.
///
/// # Safety
/// `params` must point to a valid struct, `bounds` to 4 doubles and `out` be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_new_gaussian(
    params: *const CrimesimParams,
    bounds: *const f64,
    nx: usize,
    ny: usize,
    sigma: f64,
    out: *mut *mut CrimesimSim,
) -> CrimesimStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if bounds.is_null() {
            return Err(null("bounds"));
        }
        let b = std::slice::from_raw_parts(bounds, 4);
        let grid = Grid::new(b[0], b[1], b[2], b[3], nx, ny).map_err(lift)?;
        let params = ModelParams::new(p.m, p.chi, p.b1, p.b2)
            .and_then(|mp| mp.with_eps(p.eps))
            .map_err(lift)?;
        let state = SimState::gaussian(grid, sigma).map_err(lift)?;
        let sim = Simulator::new(state, params, StepControl::default()).map_err(lift)?;
        *out = Box::into_raw(Box::new(CrimesimSim { inner: sim }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_free(sim: *mut CrimesimSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances to `t_target`. `state_out` receives `Running` when the target was
/// reached, otherwise the reason the run stopped.
///
/// # Safety
/// `sim` must be a live handle and `state_out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_advance(
    sim: *mut CrimesimSim,
    t_target: f64,
    state_out: *mut CrimesimRunState,
) -> CrimesimStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if !t_target.is_finite() {
            return Err((CrimesimStatus::InvalidArgument, format!("t_target = {t_target}")));
        }
        let state = match sim.inner.advance_to(t_target).map_err(lift)? {
            Advance::Reached => CrimesimRunState::Running,
            Advance::Stopped(s, _) => s.into(),
        };
        if let Some(o) = state_out.as_mut() {
            *o = state;
        }
        Ok(())
    })
}

/// Current simulation time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_time(sim: *const CrimesimSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.inner.state().t)
}

/// Largest `max |u|` seen so far, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_peak_linf_u(sim: *const CrimesimSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.inner.peak_linf_u())
}

/// # Safety
/// `sim` must be a live handle; `nx` and `ny` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_dims(sim: *const CrimesimSim, nx: *mut usize, ny: *mut usize) -> CrimesimStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let g = sim.inner.state().grid();
        *out_ref(nx, "nx")? = g.nx();
        *out_ref(ny, "ny")? = g.ny();
        Ok(())
    })
}

unsafe fn copy_field(f: &Field, buf: *mut f64, len: usize) -> Result<(), (CrimesimStatus, String)> {
    let v = f.values();
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < v.len() {
        return Err((
            CrimesimStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", v.len()),
        ));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
    Ok(())
}

/// Copies `u` into `buf` (at least `nx * ny` doubles).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_copy_u(sim: *const CrimesimSim, buf: *mut f64, len: usize) -> CrimesimStatus {
    guard(|| copy_field(&sim.as_ref().ok_or_else(|| null("sim"))?.inner.state().u, buf, len))
}

/// Copies `v` into `buf` (at least `nx * ny` doubles).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn crimesim_sim_copy_v(sim: *const CrimesimSim, buf: *mut f64, len: usize) -> CrimesimStatus {
    guard(|| copy_field(&sim.as_ref().ok_or_else(|| null("sim"))?.inner.state().v, buf, len))
}

/// Writes a `CWF1` snapshot of `nx * ny` values.
///
/// # Safety
/// `path` and `name` must be NUL-terminated strings, `bounds` point to 4
/// doubles and `values` to `nx * ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn crimesim_snapshot_write(
    path: *const c_char,
    values: *const f64,
    nx: usize,
    ny: usize,
    bounds: *const f64,
    t: f64,
    name: *const c_char,
) -> CrimesimStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let name = path_arg(name, "name")?;
        if values.is_null() {
            return Err(null("values"));
        }
        if bounds.is_null() {
            return Err(null("bounds"));
        }
        let b = std::slice::from_raw_parts(bounds, 4);
        let grid = Grid::new(b[0], b[1], b[2], b[3], nx, ny).map_err(lift)?;
        let data = std::slice::from_raw_parts(values, grid.len()).to_vec();
        let field = Field::from_values(grid, data).map_err(lift)?;
        write_snapshot(&field, t, &name.to_string_lossy(), &path).map_err(lift)
    })
}

/// Reads a `CWF1` snapshot. `nx`, `ny`, `t` and `bounds` (4 doubles, may be
/// null) are always filled on a successful parse; if `values` is null or
/// `len < nx * ny` the call returns `BufferTooSmall` so the caller can
/// allocate and retry.
///
/// # Safety
/// `path` must be a NUL-terminated string; the out pointers valid for writes;
/// `values` null or valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn crimesim_snapshot_read(
    path: *const c_char,
    values: *mut f64,
    len: usize,
    nx: *mut usize,
    ny: *mut usize,
    t: *mut f64,
    bounds: *mut f64,
) -> CrimesimStatus {
    guard(|| {
        let snap = read_snapshot(&path_arg(path, "path")?).map_err(lift)?;
        let g = *snap.field.grid();
        *out_ref(nx, "nx")? = g.nx();
        *out_ref(ny, "ny")? = g.ny();
        *out_ref(t, "t")? = snap.t;
        if !bounds.is_null() {
            let (a, b, c, d) = g.bounds();
            std::slice::from_raw_parts_mut(bounds, 4).copy_from_slice(&[a, b, c, d]);
        }
        if values.is_null() {
            return Err((CrimesimStatus::BufferTooSmall, format!("{} values needed", g.len())));
        }
        copy_field(&snap.field, values, len)
    })
}
