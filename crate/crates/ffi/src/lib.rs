//! C ABI for the pvgrid simulator.
//!
//! Scenarios and runs are opaque handles created and released through this
//! interface. Every fallible call returns a [`PvgStatus`]; on anything other
//! than `PVG_STATUS_OK` a description is available from
//! [`pvg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pvgrid::battery::SocGate;
use pvgrid::ems::{self, CaseLabel, GridPower, GridRequest};
use pvgrid::mppt::PvControlMode;
use pvgrid::sim::{self, Scenario, SimOutput, SimRecord};
use pvgrid::{csv, presets, scenario_file};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidScenario = 4,
    /// The run stopped early; the partial run is still returned.
    RunFault = 5,
    OutOfRange = 6,
    Io = 7,
    /// Demand could not be met; the output holds the load-shedding dispatch.
    Infeasible = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvgPvMode {
    Mppt = 0,
    PowerReference = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvgCase {
    Other = 0,
    Case1 = 1,
    Case2 = 2,
    Case3 = 3,
    Case4 = 4,
    Case5 = 5,
}

pub const PVG_FLAG_Q_SATURATED: u32 = 1;
pub const PVG_FLAG_D_SATURATED: u32 = 2;
pub const PVG_FLAG_INFEASIBLE: u32 = 4;
pub const PVG_FLAG_BUS_FAULT: u32 = 8;

/// Parsed scenario.
pub struct PvgScenario(Scenario);

/// Result of a simulation run.
pub struct PvgRun(SimOutput);

/// One logged step. Powers in kW, voltages in V, currents in A.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvgRecord {
    pub t: f64,
    pub irradiance: f64,
    pub p_pv: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub v_pv_ref: f64,
    pub pv_mode: PvgPvMode,
    pub p_pv_ref: f64,
    pub p_bat: f64,
    pub p_bat_ref: f64,
    pub soc: f64,
    pub p_load: f64,
    pub p_grid: f64,
    pub p_grid_set: f64,
    pub q_grid: f64,
    pub q_set: f64,
    pub v_dc: f64,
    pub balance_residual: f64,
    pub case_label: PvgCase,
    /// Bitwise OR of the `PVG_FLAG_*` constants.
    pub flags: u32,
}

/// Inputs to a single dispatch decision.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvgDispatchInput {
    pub p_mpp_available: f64,
    pub p_load: f64,
    /// Requested export (kW). Ignored when `absorb_max` is set.
    pub p_request: f64,
    pub absorb_max: bool,
    pub q_request: f64,
    pub p_import_limit: f64,
    pub p_export_limit: f64,
    pub soc: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvgDispatch {
    pub pv_mode: PvgPvMode,
    pub p_pv_ref: f64,
    pub p_bat_ref: f64,
    pub p_grid_set: f64,
    pub q_set: f64,
    pub load_shed: f64,
    pub case_label: PvgCase,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PvgStatus, msg: impl Into<String>) -> PvgStatus {
    set_error(msg);
    status
}

/// Run `f`, turning a panic into `PVG_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> PvgStatus) -> PvgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(PvgStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, PvgStatus> {
    if p.is_null() {
        return Err(fail(PvgStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PvgStatus::InvalidUtf8, "string is not valid UTF-8"))
}

fn case(label: CaseLabel) -> PvgCase {
    match label {
        CaseLabel::Case1 => PvgCase::Case1,
        CaseLabel::Case2 => PvgCase::Case2,
        CaseLabel::Case3 => PvgCase::Case3,
        CaseLabel::Case4 => PvgCase::Case4,
        CaseLabel::Case5 => PvgCase::Case5,
        CaseLabel::Other => PvgCase::Other,
    }
}

fn mode(m: PvControlMode) -> PvgPvMode {
    match m {
        PvControlMode::Mppt => PvgPvMode::Mppt,
        PvControlMode::PowerReference(_) => PvgPvMode::PowerReference,
    }
}

impl From<&SimRecord> for PvgRecord {
    fn from(r: &SimRecord) -> Self {
        let f = r.flags;
        let flags = ((f.q_saturated as u32) * PVG_FLAG_Q_SATURATED)
            | ((f.d_saturated as u32) * PVG_FLAG_D_SATURATED)
            | ((f.infeasible as u32) * PVG_FLAG_INFEASIBLE)
            | ((f.bus_fault as u32) * PVG_FLAG_BUS_FAULT);
        Self {
            t: r.t,
            irradiance: r.irradiance,
            p_pv: r.p_pv,
            v_pv: r.v_pv,
            i_pv: r.i_pv,
            v_pv_ref: r.v_pv_ref,
            pv_mode: mode(r.pv_mode),
            p_pv_ref: r.p_pv_ref,
            p_bat: r.p_bat,
            p_bat_ref: r.p_bat_ref,
            soc: r.soc,
            p_load: r.p_load,
            p_grid: r.p_grid,
            p_grid_set: r.p_grid_set,
            q_grid: r.q_grid,
            q_set: r.q_set,
            v_dc: r.v_dc,
            balance_residual: r.balance_residual,
            case_label: case(r.case_label),
            flags,
        }
    }
}

impl From<ems::Dispatch> for PvgDispatch {
    fn from(d: ems::Dispatch) -> Self {
        Self {
            pv_mode: mode(d.pv_mode),
            p_pv_ref: d.p_pv_ref,
            p_bat_ref: d.p_bat_ref,
            p_grid_set: d.p_grid_set,
            q_set: d.q_set,
            load_shed: d.load_shed,
            case_label: case(d.case_label),
        }
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pvg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pvg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a scenario file held in `text`.
///
/// # Safety
/// `text` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pvg_scenario_from_str(text: *const c_char, out: *mut *mut PvgScenario) -> PvgStatus {
    guard(|| {
        if out.is_null() {
            return fail(PvgStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match scenario_file::parse_scenario(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(PvgScenario(s)));
                PvgStatus::Ok
            }
            Err(e) => fail(PvgStatus::Parse, e.to_string()),
        }
    })
}

/// Built-in reference scenario `number` (1 to 5).
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pvg_scenario_preset(number: u32, out: *mut *mut PvgScenario) -> PvgStatus {
    guard(|| {
        if out.is_null() {
            return fail(PvgStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(built) = u8::try_from(number).ok().and_then(presets::preset) else {
            return fail(PvgStatus::OutOfRange, format!("no preset {number}, expected 1 to 5"));
        };
        match built {
            Ok(s) => {
                *out = Box::into_raw(Box::new(PvgScenario(s)));
                PvgStatus::Ok
            }
            Err(e) => fail(PvgStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvg_scenario_free(scenario: *mut PvgScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulate `scenario`. On `PVG_STATUS_RUN_FAULT` `*out` still receives the
/// records logged before the fault.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pvg_run(scenario: *const PvgScenario, out: *mut *mut PvgRun) -> PvgStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(PvgStatus::NullArgument, "null argument");
        }
        *out = ptr::null_mut();
        match sim::run(&(*scenario).0) {
            Ok(output) => {
                let fault = output.summary.fault.clone();
                *out = Box::into_raw(Box::new(PvgRun(output)));
                match fault {
                    Some(f) => fail(PvgStatus::RunFault, f.to_string()),
                    None => PvgStatus::Ok,
                }
            }
            Err(e) => fail(PvgStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// Number of logged records, 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pvg_run_len(run: *const PvgRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.records.len())
}

/// Copy record `index` into `*out`.
///
/// # Safety
/// `run` must be a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pvg_run_record(run: *const PvgRun, index: usize, out: *mut PvgRecord) -> PvgStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(PvgStatus::NullArgument, "null argument");
        };
        match run.0.records.get(index) {
            Some(r) => {
                *out = r.into();
                PvgStatus::Ok
            }
            None => fail(PvgStatus::OutOfRange, format!("record {index} of {}", run.0.records.len())),
        }
    })
}

/// Write the run as CSV to `path`.
///
/// # Safety
/// `run` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pvg_run_write_csv(run: *const PvgRun, path: *const c_char) -> PvgStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(PvgStatus::NullArgument, "null run");
        };
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match std::fs::write(path, csv::to_string(&run.0.records)) {
            Ok(()) => PvgStatus::Ok,
            Err(e) => fail(PvgStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `run` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pvg_run_free(run: *mut PvgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// One dispatch decision with the battery of `scenario`. Returns
/// `PVG_STATUS_INFEASIBLE` with the load-shedding dispatch in `*out` when
/// demand cannot be met.
///
/// # Safety
/// `scenario` must be a live handle; `input` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pvg_dispatch(
    scenario: *const PvgScenario,
    input: *const PvgDispatchInput,
    out: *mut PvgDispatch,
) -> PvgStatus {
    guard(|| {
        let (Some(scenario), Some(input), false) = (scenario.as_ref(), input.as_ref(), out.is_null()) else {
            return fail(PvgStatus::NullArgument, "null argument");
        };
        let grid = GridRequest {
            p_request: if input.absorb_max { GridPower::AbsorbMax } else { GridPower::Export(input.p_request) },
            q_request: input.q_request,
            p_import_limit: input.p_import_limit,
            p_export_limit: input.p_export_limit,
        };
        if let Err(m) = grid.validate() {
            return fail(PvgStatus::OutOfRange, m);
        }
        if !(0.0..=1.0).contains(&input.soc) {
            return fail(PvgStatus::OutOfRange, format!("soc must be in [0, 1], got {}", input.soc));
        }
        let bat = &scenario.0.battery;
        let mut gate = SocGate::from_soc(input.soc, bat);
        match ems::dispatch(input.p_mpp_available, input.p_load, &grid, input.soc, bat, &mut gate) {
            Ok(d) => {
                *out = d.into();
                PvgStatus::Ok
            }
            Err(e) => {
                *out = e.fallback.into();
                fail(PvgStatus::Infeasible, format!("shortfall of {} kW", e.shortfall))
            }
        }
    })
}
