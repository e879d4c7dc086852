//! C ABI over the twistbench library.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a `TbStatus`; on failure
//! `tb_last_error_message` describes the error for the calling thread.
//! Panics never cross the boundary and surface as `TB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use twistbench::cmc_solver::{solve, SolveConfig, SolveOutcome, SolveResult};
use twistbench::config::SpacetimeConfig;
use twistbench::{Error, GraphField, ScalarField, SpacetimeModel};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or an invalid parameter.
    Config = 3,
    /// A time outside the open interval.
    Domain = 4,
    NotSpacelike = 5,
    Precondition = 6,
    /// Buffer length does not match the node count.
    BadLength = 7,
    Io = 8,
    Panic = 9,
}

/// Outcome tag of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbOutcome {
    Converged = 0,
    NonExistenceCertificate = 1,
    NotConverged = 2,
}

/// A spacetime: interval, fiber grid and twisting function.
pub struct TbModel {
    inner: SpacetimeModel,
}

/// A finished solve with its iterate log.
pub struct TbSolve {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TbStatus, msg: impl Into<String>) -> TbStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> TbStatus {
    let status = match &err {
        Error::Config(_) | Error::Json(_) => TbStatus::Config,
        Error::Domain { .. } => TbStatus::Domain,
        Error::NotSpacelike { .. } => TbStatus::NotSpacelike,
        Error::Precondition(_) => TbStatus::Precondition,
        Error::Io(_) => TbStatus::Io,
    };
    fail(status, err.to_string())
}

fn guard(body: impl FnOnce() -> Result<(), TbStatus>) -> TbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TbStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TbStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, TbStatus> {
    p.as_ref()
        .ok_or_else(|| fail(TbStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, TbStatus> {
    p.as_mut()
        .ok_or_else(|| fail(TbStatus::NullPointer, format!("{name} is null")))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TbStatus> {
    if p.is_null() {
        return Err(fail(TbStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TbStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn field_arg(
    model: &SpacetimeModel,
    p: *const f64,
    len: usize,
    name: &str,
) -> Result<ScalarField, TbStatus> {
    if p.is_null() {
        return Err(fail(TbStatus::NullPointer, format!("{name} is null")));
    }
    let nodes = model.fiber().len();
    if len != nodes {
        return Err(fail(
            TbStatus::BadLength,
            format!("{name} has {len} values, the grid has {nodes} nodes"),
        ));
    }
    Ok(ScalarField(std::slice::from_raw_parts(p, len).to_vec()))
}

unsafe fn write_field(src: &[f64], out: *mut f64, len: usize) -> Result<(), TbStatus> {
    if out.is_null() {
        return Err(fail(TbStatus::NullPointer, "output buffer is null"));
    }
    if len != src.len() {
        return Err(fail(
            TbStatus::BadLength,
            format!("output buffer holds {len} values, need {}", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(src);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from a JSON spacetime description
/// (`{"interval": [a, b], "fiber": {...}, "twist": {...}}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_model_from_json(
    json: *const c_char,
    out: *mut *mut TbModel,
) -> TbStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let cfg: SpacetimeConfig =
            serde_json::from_str(text).map_err(|e| from_error(Error::Json(e)))?;
        let inner = cfg.build().map_err(from_error)?;
        *slot = Box::into_raw(Box::new(TbModel { inner }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from `tb_model_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tb_model_free(model: *mut TbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of fiber grid nodes, the length of every field buffer.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_model_node_count(model: *const TbModel, out: *mut usize) -> TbStatus {
    guard(|| {
        *out_ref(out, "out")? = borrow(model, "model")?.inner.fiber().len();
        Ok(())
    })
}

/// Fiber dimension.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_model_dim(model: *const TbModel, out: *mut usize) -> TbStatus {
    guard(|| {
        *out_ref(out, "out")? = borrow(model, "model")?.inner.dim();
        Ok(())
    })
}

/// Mean curvature of the graph `t = u(x)`, node values in row-major order.
///
/// # Safety
/// `u` and `out` must hold `len` and `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tb_mean_curvature(
    model: *const TbModel,
    u: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> TbStatus {
    guard(|| {
        let model = &borrow(model, "model")?.inner;
        let u = field_arg(model, u, len, "u")?;
        let h = GraphField::new(model, u)
            .and_then(|g| g.mean_curvature())
            .map_err(from_error)?;
        write_field(&h, out, out_len)
    })
}

/// Largest causal margin `|du|_g / f` over the grid; below 1 means spacelike.
/// Succeeds for non-spacelike graphs too.
///
/// # Safety
/// `u` must hold `len` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_spacelike_margin(
    model: *const TbModel,
    u: *const f64,
    len: usize,
    out: *mut f64,
) -> TbStatus {
    guard(|| {
        let model = &borrow(model, "model")?.inner;
        let slot = out_ref(out, "out")?;
        let u = field_arg(model, u, len, "u")?;
        let g = GraphField::new(model, u).map_err(from_error)?;
        *slot = g.spacelike_check().max_margin;
        Ok(())
    })
}

/// Solves for a maximal, CMC or generalized-target graph from `u0`.
/// `solve_json` may be NULL for the defaults. A certificate or an
/// unconverged run still returns `TB_STATUS_OK`; inspect the outcome.
///
/// # Safety
/// `u0` must hold `len` doubles; `solve_json` is NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tb_solve(
    model: *const TbModel,
    solve_json: *const c_char,
    u0: *const f64,
    len: usize,
    out: *mut *mut TbSolve,
) -> TbStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let model = &borrow(model, "model")?.inner;
        let cfg: SolveConfig = if solve_json.is_null() {
            SolveConfig::default()
        } else {
            serde_json::from_str(str_arg(solve_json, "solve_json")?)
                .map_err(|e| from_error(Error::Json(e)))?
        };
        let u0 = field_arg(model, u0, len, "u0")?;
        let inner = solve(model, &cfg, &u0).map_err(from_error)?;
        *slot = Box::into_raw(Box::new(TbSolve { inner }));
        Ok(())
    })
}

/// Releases a solve. NULL is ignored.
///
/// # Safety
/// `s` must come from `tb_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_free(s: *mut TbSolve) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_outcome(s: *const TbSolve, out: *mut TbOutcome) -> TbStatus {
    guard(|| {
        *out_ref(out, "out")? = match borrow(s, "solve")?.inner.outcome {
            SolveOutcome::Converged { .. } => TbOutcome::Converged,
            SolveOutcome::NonExistenceCertificate(_) => TbOutcome::NonExistenceCertificate,
            SolveOutcome::NotConverged { .. } => TbOutcome::NotConverged,
        };
        Ok(())
    })
}

/// Final (or best) residual `‖H − target‖∞`; NaN for a certificate.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_residual(s: *const TbSolve, out: *mut f64) -> TbStatus {
    guard(|| {
        *out_ref(out, "out")? = match &borrow(s, "solve")?.inner.outcome {
            SolveOutcome::Converged { residual, .. } => *residual,
            SolveOutcome::NotConverged { best_residual, .. } => *best_residual,
            SolveOutcome::NonExistenceCertificate(_) => f64::NAN,
        };
        Ok(())
    })
}

/// Copies the converged (or best) graph. Fails with `TB_STATUS_PRECONDITION`
/// for a certificate, which carries no graph.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_copy_solution(
    s: *const TbSolve,
    out: *mut f64,
    len: usize,
) -> TbStatus {
    guard(|| {
        let u = match &borrow(s, "solve")?.inner.outcome {
            SolveOutcome::Converged { u, .. } => u,
            SolveOutcome::NotConverged { best_u, .. } => best_u,
            SolveOutcome::NonExistenceCertificate(_) => {
                return Err(fail(
                    TbStatus::Precondition,
                    "a non-existence certificate has no graph",
                ))
            }
        };
        write_field(u, out, len)
    })
}

/// Outcome as JSON, including certificate details. Release the string
/// with `tb_string_free`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_outcome_json(
    s: *const TbSolve,
    out: *mut *mut c_char,
) -> TbStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let text = serde_json::to_string(&borrow(s, "solve")?.inner.outcome)
            .map_err(|e| from_error(Error::Json(e)))?;
        *slot = CString::new(text)
            .map_err(|e| fail(TbStatus::Io, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
