//! C ABI for the solver: opaque handles, integer status codes, and a handful
//! of direct function exports. The header `include/rotvem.h` is generated by
//! cbindgen at build time.
//!
//! Conventions: every fallible call returns an [`RvStatus`]; on failure a
//! thread-local message is retrievable via [`rv_last_error_message`] until
//! the next failing call on the same thread. Handles are created and
//! destroyed by matching `_free` calls; passing null where a handle is
//! expected yields `RV_NULL_POINTER`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rotvem::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use rotvem::problems::ExampleId;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RvStatus {
    RvOk = 0,
    RvNullPointer = 1,
    RvInvalidArgument = 2,
    RvBadConfig = 3,
    RvRunFailed = 4,
    RvPanic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Message of the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Opaque experiment configuration.
pub struct RvConfig {
    inner: ExperimentConfig,
}

/// Opaque run outcome.
pub struct RvOutcome {
    inner: ExperimentOutcome,
}

/// One convergence-table row; undefined orders are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RvRow {
    pub h: f64,
    pub l2_err: f64,
    pub l2_order: f64,
    pub rot_err: f64,
    pub rot_order: f64,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, RvStatus> {
    if ptr.is_null() {
        return Err(RvStatus::RvNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string is not valid UTF-8".into());
        RvStatus::RvInvalidArgument
    })
}

/// Parses a config in the `key = value` file format.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_config_parse(
    text: *const c_char,
    out: *mut *mut RvConfig,
) -> RvStatus {
    if out.is_null() {
        return RvStatus::RvNullPointer;
    }
    let text = match cstr(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match ExperimentConfig::parse(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(RvConfig { inner }));
            RvStatus::RvOk
        }
        Err(e) => {
            set_error(e.to_string());
            RvStatus::RvBadConfig
        }
    }
}

/// Creates the default config of a built-in example
/// (`circle`, `line_singular`, `double_circle`, `layers`).
///
/// # Safety
/// `example` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_config_default(
    example: *const c_char,
    out: *mut *mut RvConfig,
) -> RvStatus {
    if out.is_null() {
        return RvStatus::RvNullPointer;
    }
    let name = match cstr(example) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let Some(id) = ExampleId::parse(name) else {
        set_error(format!("unknown example '{name}'"));
        return RvStatus::RvInvalidArgument;
    };
    let inner = ExperimentConfig::new(id, vec![3, 4, 5], PathBuf::from("results").join(name));
    *out = Box::into_raw(Box::new(RvConfig { inner }));
    RvStatus::RvOk
}

/// Replaces the refinement levels.
///
/// # Safety
/// `config` must come from a constructor; `levels` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn rv_config_set_levels(
    config: *mut RvConfig,
    levels: *const u32,
    n: usize,
) -> RvStatus {
    if config.is_null() || levels.is_null() {
        return RvStatus::RvNullPointer;
    }
    let slice = std::slice::from_raw_parts(levels, n);
    (*config).inner.levels = slice.to_vec();
    match (*config).inner.validate() {
        Ok(()) => RvStatus::RvOk,
        Err(e) => {
            set_error(e.to_string());
            RvStatus::RvBadConfig
        }
    }
}

/// Sets the reference level for the self-convergence examples.
///
/// # Safety
/// `config` must come from a constructor.
#[no_mangle]
pub unsafe extern "C" fn rv_config_set_ref_level(config: *mut RvConfig, level: u32) -> RvStatus {
    if config.is_null() {
        return RvStatus::RvNullPointer;
    }
    (*config).inner.ref_level = Some(level);
    RvStatus::RvOk
}

/// Sets the artifact output directory.
///
/// # Safety
/// `config` must come from a constructor; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rv_config_set_out_dir(
    config: *mut RvConfig,
    path: *const c_char,
) -> RvStatus {
    if config.is_null() {
        return RvStatus::RvNullPointer;
    }
    let path = match cstr(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    (*config).inner.out_dir = PathBuf::from(path);
    RvStatus::RvOk
}

/// Serializes the config; the returned string must be freed with
/// [`rv_string_free`].
///
/// # Safety
/// `config` must come from a constructor and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_config_serialize(
    config: *const RvConfig,
    out: *mut *mut c_char,
) -> RvStatus {
    if config.is_null() || out.is_null() {
        return RvStatus::RvNullPointer;
    }
    let text = (*config).inner.serialize();
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            RvStatus::RvOk
        }
        Err(_) => RvStatus::RvInvalidArgument,
    }
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from [`rv_config_serialize`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `config` must come from a constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rv_config_free(config: *mut RvConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the experiment; artifacts are written under the config's output
/// directory and the convergence table is available through the handle.
///
/// # Safety
/// `config` must come from a constructor and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_run(config: *const RvConfig, out: *mut *mut RvOutcome) -> RvStatus {
    if config.is_null() || out.is_null() {
        return RvStatus::RvNullPointer;
    }
    let cfg = &(*config).inner;
    let result = catch_unwind(AssertUnwindSafe(|| run_experiment(cfg)));
    match result {
        Ok(Ok(inner)) => {
            *out = Box::into_raw(Box::new(RvOutcome { inner }));
            RvStatus::RvOk
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            RvStatus::RvRunFailed
        }
        Err(_) => {
            set_error("panic inside the solver".into());
            RvStatus::RvPanic
        }
    }
}

/// Number of convergence-table rows.
///
/// # Safety
/// `outcome` must come from [`rv_run`].
#[no_mangle]
pub unsafe extern "C" fn rv_outcome_rows(outcome: *const RvOutcome) -> usize {
    if outcome.is_null() {
        return 0;
    }
    (*outcome).inner.table.rows.len()
}

/// Copies one table row; undefined orders come out as NaN.
///
/// # Safety
/// `outcome` must come from [`rv_run`] and `row` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_outcome_row(
    outcome: *const RvOutcome,
    index: usize,
    row: *mut RvRow,
) -> RvStatus {
    if outcome.is_null() || row.is_null() {
        return RvStatus::RvNullPointer;
    }
    let rows = &(*outcome).inner.table.rows;
    if index >= rows.len() {
        set_error(format!("row {index} out of range ({} rows)", rows.len()));
        return RvStatus::RvInvalidArgument;
    }
    let r = &rows[index];
    *row = RvRow {
        h: r.h,
        l2_err: r.l2_err,
        l2_order: r.l2_order.unwrap_or(f64::NAN),
        rot_err: r.rot_err,
        rot_order: r.rot_order.unwrap_or(f64::NAN),
    };
    RvStatus::RvOk
}

/// True when every level completed.
///
/// # Safety
/// `outcome` must come from [`rv_run`].
#[no_mangle]
pub unsafe extern "C" fn rv_outcome_all_ok(outcome: *const RvOutcome) -> bool {
    !outcome.is_null() && (*outcome).inner.all_ok
}

/// # Safety
/// `outcome` must come from [`rv_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rv_outcome_free(outcome: *mut RvOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Shape-regularity threshold τ(θ).
#[no_mangle]
pub extern "C" fn rv_tau_theta(theta: f64, kappa0: f64, kappa1: f64) -> f64 {
    rotvem::regularity::tau_theta(theta, kappa0, kappa1)
}

/// Error-constant bound ϱ(κ₀, κ₁).
#[no_mangle]
pub extern "C" fn rv_varrho(kappa0: f64, kappa1: f64) -> f64 {
    rotvem::regularity::varrho(kappa0, kappa1)
}
