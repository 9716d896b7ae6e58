//! C interface to `entropy-decay`.
//!
//! Models live behind an opaque `EdModel` handle. Every fallible call
//! returns an `EdStatus`; on failure `ed_last_error_message` describes the
//! most recent error on the calling thread. Outputs are written through
//! pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entropy_decay::bochner::certified_kappa;
use entropy_decay::cli::parse_model_string;
use entropy_decay::estimation::{estimate_model, ConstantKind, EstimateOptions};
use entropy_decay::evolution::counterexample_42;
use entropy_decay::functionals::entropy;
use entropy_decay::spectral::spectral_gap;
use entropy_decay::{Chain, Error, ModelSpec};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    InvalidModel = 4,
    DimensionMismatch = 5,
    Domain = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Constant selector for `ed_estimate`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdConstant {
    Gap = 0,
    Lsi = 1,
    Mlsi = 2,
    Kappa = 3,
}

fn constant_kind(raw: i32) -> Result<ConstantKind, Fail> {
    match raw {
        x if x == EdConstant::Gap as i32 => Ok(ConstantKind::Gap),
        x if x == EdConstant::Lsi as i32 => Ok(ConstantKind::Lsi),
        x if x == EdConstant::Mlsi as i32 => Ok(ConstantKind::Mlsi),
        x if x == EdConstant::Kappa as i32 => Ok(ConstantKind::Kappa),
        x => Err(Fail(EdStatus::InvalidInput, format!("unknown constant selector {x}"))),
    }
}

/// A model with its generator and stationary measure.
pub struct EdModel {
    chain: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EdStatus {
    match e {
        Error::Config(_) => EdStatus::InvalidInput,
        Error::InvalidModel(_)
        | Error::NegativeRate { .. }
        | Error::Boundary(_)
        | Error::LogConcavity { .. }
        | Error::Monotonicity { .. }
        | Error::WrongFamily { .. }
        | Error::Capacity { .. } => EdStatus::InvalidModel,
        Error::DimensionMismatch { .. } => EdStatus::DimensionMismatch,
        Error::Integration(_) => EdStatus::Numerical,
        Error::Io(_) => EdStatus::Io,
        _ => EdStatus::Domain,
    }
}

struct Fail(EdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EdStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    // SAFETY: the caller passes either null or a valid pointer.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(EdStatus::NullPointer, format!("`{name}` is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<*mut T, Fail> {
    if p.is_null() {
        return Err(Fail(EdStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(p)
}

fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail(EdStatus::NullPointer, format!("`{name}` is null")));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn new_model(spec: &ModelSpec, out: *mut *mut EdModel) -> Result<(), Fail> {
    let out = out_ptr(out, "out")?;
    let chain = Chain::new(spec)?;
    // SAFETY: `out` is non-null and writable.
    unsafe { *out = Box::into_raw(Box::new(EdModel { chain })) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ed_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from a string such as `poisson:lambda=1,n_max=60` or
/// `linear_zr:a=1/1.2/1.4,particles=4`.
///
/// # Safety
/// `model` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ed_model_new(model: *const c_char, out: *mut *mut EdModel) -> EdStatus {
    guard(|| {
        if model.is_null() {
            return Err(Fail(EdStatus::NullPointer, "`model` is null".into()));
        }
        let s = unsafe { CStr::from_ptr(model) }
            .to_str()
            .map_err(|e| Fail(EdStatus::InvalidUtf8, e.to_string()))?;
        let spec = parse_model_string(s)?.build()?.spec;
        new_model(&spec, out)
    })
}

/// Birth-death model with rates `birth[0..len]`, `death[0..len]`.
///
/// # Safety
/// `birth` and `death` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_model_birth_death(
    birth: *const f64,
    death: *const f64,
    len: usize,
    out: *mut *mut EdModel,
) -> EdStatus {
    guard(|| {
        let spec = ModelSpec::BirthDeath {
            birth: slice(birth, len, "birth")?.to_vec(),
            death: slice(death, len, "death")?.to_vec(),
            offset: 0,
        };
        spec.validate()?;
        new_model(&spec, out)
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from a constructor here and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ed_model_free(model: *mut EdModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_model_n_states(model: *const EdModel, out: *mut usize) -> EdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_ptr(out, "out")?;
        unsafe { *out = m.chain.n_states() };
        Ok(())
    })
}

/// Certified lower bound on the convexity constant. `certified` is set to
/// false, and `kappa` to 0, when no sufficient condition applies.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_certified_kappa(model: *const EdModel, kappa: *mut f64, certified: *mut bool) -> EdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let (kappa, certified) = (out_ptr(kappa, "kappa")?, out_ptr(certified, "certified")?);
        let c = certified_kappa(&m.chain.spec)?;
        unsafe {
            *kappa = c.kappa;
            *certified = c.is_certified();
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_spectral_gap(model: *const EdModel, out: *mut f64) -> EdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_ptr(out, "out")?;
        let g = spectral_gap(&m.chain.generator, &m.chain.measure)?;
        unsafe { *out = g };
        Ok(())
    })
}

/// Numerical estimate of the constant selected by `kind` (an `EdConstant`);
/// an upper bound except for the gap, which is exact. `restarts = 0` picks
/// the default.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_estimate(
    model: *const EdModel,
    kind: i32,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> EdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_ptr(out, "out")?;
        let opts = EstimateOptions {
            restarts: (restarts > 0).then_some(restarts),
            seed,
            ..Default::default()
        };
        let r = estimate_model(&m.chain.spec, constant_kind(kind)?, &opts)?;
        unsafe { *out = r.value };
        Ok(())
    })
}

/// `Ent_pi(f)` for a positive function given by state index.
///
/// # Safety
/// `f` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_entropy(model: *const EdModel, f: *const f64, len: usize, out: *mut f64) -> EdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_ptr(out, "out")?;
        let e = entropy(&m.chain.measure, slice(f, len, "f")?)?;
        unsafe { *out = e };
        Ok(())
    })
}

/// Second derivative of the entropy at `t = 0` for the three-site
/// zero-range chain with rates `(c1, 1, 1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_counterexample(c1: f64, epsilon: f64, out: *mut f64) -> EdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = counterexample_42(c1, epsilon)?;
        unsafe { *out = c.total };
        Ok(())
    })
}
