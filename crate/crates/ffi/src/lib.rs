//! C ABI over the relopt pricing routines.
//!
//! Every function returns a [`RoStatus`]; results go through out-pointers.
//! On failure `ro_last_error` describes the most recent error on the
//! calling thread. Models are opaque handles built from the JSON form the
//! CLI writes (`model.json`) and released with `ro_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relopt::economics::{breakeven_duration, CostModel};
use relopt::models::OUParams;
use relopt::pricing::{levelize_annual, mc_capacity_premium, ou_strip_closed_form, LevelizeMode};
use relopt::risk::{cvar, quantile, Sample};
use relopt::{ContractTerms, Error, ModelSpec};

/// Status code returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    ComputationError = 5,
    Panic = 6,
}

/// Contract terms; times in years, strike in currency/MWh.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RoContractTerms {
    pub t: f64,
    pub tau: f64,
    pub dt: f64,
    pub k: f64,
    pub r: f64,
    pub q: f64,
}

/// Monte Carlo premium per MW (scaled by `q`).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RoPremium {
    pub premium: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

/// Values accepted by `ro_levelize_annual`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoLevelizeMode {
    StartOfYear = 0,
    Continuous = 1,
}

/// Opaque calibrated model.
pub struct RoModel {
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RoStatus {
    match e {
        Error::Json(_) | Error::Config(_) => RoStatus::ParseError,
        Error::InvalidParameter(_) => RoStatus::InvalidArgument,
        _ => RoStatus::ComputationError,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (RoStatus, String)>) -> RoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RoStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside relopt".into());
            RoStatus::Panic
        }
    }
}

fn lib<T>(r: relopt::Result<T>) -> Result<T, (RoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), (RoStatus, String)> {
    if p.is_null() {
        Err((RoStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn terms_of(t: &RoContractTerms) -> Result<ContractTerms, (RoStatus, String)> {
    let mut terms = lib(ContractTerms::new(t.t, t.tau, t.dt, t.k, t.r))?;
    terms.q = t.q;
    lib(terms.validate())?;
    Ok(terms)
}

unsafe fn sample_of(xs: *const f64, n: usize) -> Result<Sample, (RoStatus, String)> {
    non_null(xs, "xs")?;
    let v = std::slice::from_raw_parts(xs, n).to_vec();
    lib(Sample::prices(v))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ro_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from its JSON form. Free with `ro_model_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ro_model_from_json(json: *const c_char, out: *mut *mut RoModel) -> RoStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (RoStatus::InvalidUtf8, e.to_string()))?;
        let spec = lib(ModelSpec::from_json(text))?;
        *out = Box::into_raw(Box::new(RoModel { spec }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from `ro_model_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ro_model_free(model: *mut RoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of regimes (1 for single-regime models).
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ro_model_regimes(model: *const RoModel, out: *mut u32) -> RoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = match &(*model).spec {
            ModelSpec::MrsmOu { regimes } => regimes.n_regimes() as u32,
            _ => 1,
        };
        Ok(())
    })
}

/// Monte Carlo premium. `r0 < 0` means no initial regime (single-regime
/// models); regime-switching models need `r0 >= 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ro_premium(
    model: *const RoModel,
    s0: f64,
    r0: i32,
    terms: *const RoContractTerms,
    n_paths: u64,
    seed: u64,
    out: *mut RoPremium,
) -> RoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(terms, "terms")?;
        non_null(out, "out")?;
        let t = terms_of(&*terms)?;
        let r0 = (r0 >= 0).then_some(r0 as usize);
        let p = lib(mc_capacity_premium(&(*model).spec, s0, r0, &t, n_paths as usize, seed))?;
        *out = RoPremium {
            premium: p.premium,
            std_error: p.std_error,
            n_paths: p.n_paths as u64,
            seed: p.seed,
        };
        Ok(())
    })
}

/// Closed-form strip value for a single-regime OU process.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ro_ou_strip_closed_form(
    kappa: f64,
    theta: f64,
    sigma: f64,
    s0: f64,
    terms: *const RoContractTerms,
    out: *mut f64,
) -> RoStatus {
    guard(|| {
        non_null(terms, "terms")?;
        non_null(out, "out")?;
        let p = lib(OUParams::new(kappa, theta, sigma))?;
        *out = lib(ou_strip_closed_form(&p, s0, &terms_of(&*terms)?))?;
        Ok(())
    })
}

/// Empirical `alpha` quantile of `n` values.
///
/// # Safety
/// `xs` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ro_quantile(xs: *const f64, n: usize, alpha: f64, out: *mut f64) -> RoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lib(quantile(&sample_of(xs, n)?, alpha))?;
        Ok(())
    })
}

/// Empirical CVaR at level `alpha`.
///
/// # Safety
/// `xs` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ro_cvar(xs: *const f64, n: usize, alpha: f64, out: *mut f64) -> RoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lib(cvar(&sample_of(xs, n)?, alpha))?;
        Ok(())
    })
}

/// Constant annual payment with the same present value as `premium`.
/// `mode` is one of the `RoLevelizeMode` values.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ro_levelize_annual(premium: f64, r: f64, tau: f64, mode: i32, out: *mut f64) -> RoStatus {
    guard(|| {
        non_null(out, "out")?;
        let mode = match mode {
            m if m == RoLevelizeMode::StartOfYear as i32 => LevelizeMode::StartOfYear,
            m if m == RoLevelizeMode::Continuous as i32 => LevelizeMode::Continuous,
            m => return Err((RoStatus::InvalidArgument, format!("unknown levelize mode {m}"))),
        };
        *out = lib(levelize_annual(premium, r, tau, mode))?;
        Ok(())
    })
}

/// Smallest integer duration in `1..=tau_max` covering CapEx and O&M.
/// Fails with `RO_STATUS_COMPUTATION_ERROR` when none does.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ro_breakeven_duration(
    model: *const RoModel,
    s0: f64,
    capex: f64,
    om: f64,
    t: f64,
    r: f64,
    dt: f64,
    tau_max: u32,
    out: *mut u32,
) -> RoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let cost = lib(CostModel::new(capex, om))?;
        let b = lib(breakeven_duration(&(*model).spec, s0, &cost, t, r, dt, tau_max))?;
        *out = b.tau_star;
        Ok(())
    })
}
