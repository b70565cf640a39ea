//! C ABI for the pricing engine.
//!
//! An engine is created from a JSON configuration document (the same format
//! the command-line tool reads) and owned by the caller until
//! [`hu_engine_free`]. Every fallible call returns an [`HuStatus`]; on failure
//! the message is kept per thread and read with [`hu_last_error_message`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use heston_unbiased::config::{validate_config, ExperimentConfig, Severity};
use heston_unbiased::estimators::{run_estimator, EstimatorKind, EstimatorReport, RunOptions};
use heston_unbiased::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parameter = 4,
    Unsupported = 5,
    Diagnostic = 6,
    OutOfRange = 7,
    Io = 8,
    Internal = 9,
    Panic = 10,
}

/// Opaque engine handle.
pub struct HuEngine {
    config: ExperimentConfig,
}

/// Result of one estimator run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HuPriceResult {
    pub mean: f64,
    pub std_error: f64,
    /// Lower end of the 95% confidence interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Average cost per sample in level-0 path units.
    pub avg_work: f64,
    pub n_samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HuStatus {
    match e {
        Error::Config(_) | Error::Json(_) => HuStatus::Config,
        Error::Parameter(_) => HuStatus::Parameter,
        Error::Unsupported(_) => HuStatus::Unsupported,
        Error::Diagnostic(_) => HuStatus::Diagnostic,
        Error::Io(_) | Error::Csv(_) => HuStatus::Io,
        _ => HuStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HuStatus>) -> HuStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HuStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside the pricing engine");
            HuStatus::Panic
        }
    }
}

fn fail(e: Error) -> HuStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn engine_ref<'a>(engine: *const HuEngine) -> Result<&'a HuEngine, HuStatus> {
    if engine.is_null() {
        set_error("engine handle is null");
        return Err(HuStatus::NullPointer);
    }
    Ok(&*engine)
}

fn to_result(r: &EstimatorReport) -> HuPriceResult {
    let (ci_lo, ci_hi) = r.confidence_interval();
    HuPriceResult {
        mean: r.mean,
        std_error: r.std_error,
        ci_lo,
        ci_hi,
        avg_work: r.avg_work_units,
        n_samples: r.n_samples,
    }
}

/// Builds an engine from a NUL-terminated JSON configuration.
///
/// # Safety
/// `config_json` must be a valid C string and `out_engine` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_new(config_json: *const c_char, out_engine: *mut *mut HuEngine) -> HuStatus {
    guard(|| {
        if config_json.is_null() || out_engine.is_null() {
            set_error("null argument");
            return Err(HuStatus::NullPointer);
        }
        *out_engine = std::ptr::null_mut();
        let text = CStr::from_ptr(config_json).to_str().map_err(|_| {
            set_error("configuration is not valid UTF-8");
            HuStatus::InvalidUtf8
        })?;
        let config = ExperimentConfig::from_json_str(text).map_err(fail)?;
        *out_engine = Box::into_raw(Box::new(HuEngine { config }));
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from [`hu_engine_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_free(engine: *mut HuEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of payoffs in the configuration; 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_payoff_count(engine: *const HuEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.config.payoffs.len())
}

/// Counts validation errors and warnings. Returns `HU_STATUS_CONFIG` when
/// there is at least one error; the first one is the last-error message.
///
/// # Safety
/// `engine` must be a live handle; the counters may be null.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_validate(
    engine: *const HuEngine,
    out_errors: *mut usize,
    out_warnings: *mut usize,
) -> HuStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let diags = validate_config(&engine.config);
        let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
        if !out_errors.is_null() {
            *out_errors = errors;
        }
        if !out_warnings.is_null() {
            *out_warnings = diags.len() - errors;
        }
        match diags.iter().find(|d| d.severity == Severity::Error) {
            Some(d) => {
                set_error(format!("[{}] {}", d.code, d.message));
                Err(HuStatus::Config)
            }
            None => Ok(()),
        }
    })
}

unsafe fn run(
    engine: *const HuEngine,
    kind: EstimatorKind,
    payoff_index: usize,
    n_samples: u64,
    seed: u64,
    workers: usize,
    out: *mut HuPriceResult,
) -> HuStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        if out.is_null() {
            set_error("result pointer is null");
            return Err(HuStatus::NullPointer);
        }
        let c = &engine.config;
        let payoff = c.payoffs.get(payoff_index).ok_or_else(|| {
            set_error(format!("payoff index {payoff_index} out of range (have {})", c.payoffs.len()));
            HuStatus::OutOfRange
        })?;
        let opts = RunOptions { workers, ..RunOptions::new(n_samples, seed) };
        let report = run_estimator(kind, &c.heston, &c.rate, payoff, &c.level_distribution(), &opts).map_err(fail)?;
        *out = to_result(&report);
        Ok(())
    })
}

/// Unbiased coupled-sum price of payoff `payoff_index`. `workers == 0` uses every core.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_price(
    engine: *const HuEngine,
    payoff_index: usize,
    n_samples: u64,
    seed: u64,
    workers: usize,
    out: *mut HuPriceResult,
) -> HuStatus {
    run(engine, EstimatorKind::CoupledSum, payoff_index, n_samples, seed, workers, out)
}

/// Plain Monte Carlo price on the fixed grid with `2^level` steps.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hu_engine_price_standard(
    engine: *const HuEngine,
    payoff_index: usize,
    level: u32,
    n_samples: u64,
    seed: u64,
    workers: usize,
    out: *mut HuPriceResult,
) -> HuStatus {
    run(engine, EstimatorKind::Standard { level }, payoff_index, n_samples, seed, workers, out)
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// without the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hu_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn hu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
