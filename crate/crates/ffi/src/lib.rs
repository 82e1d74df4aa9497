//! C ABI over the brwlab core.
//!
//! Every function returns a [`BrwStatus`]. On failure, [`brw_last_error`]
//! returns a message for the calling thread. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use brwlab::harness::{self, ExperimentConfig, HarnessError, RunOptions, RunReport};
use brwlab::models::{self, DiscretePareto, DisplacementLaw, ModelError};
use brwlab::stablelim::{self, ArSpec, StableSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    ConditionsFailed = 4,
    Simulation = 5,
    Io = 6,
    InvalidArgument = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Experiment configuration handle.
pub struct BrwConfig(ExperimentConfig);

/// Run report handle.
pub struct BrwReport(RunReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrwCounts {
    pub replicates: u64,
    pub extinct: u64,
    pub capped: u64,
    pub used: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrwCalibration {
    pub theta: f64,
    pub spacing: f64,
    pub m_theta: f64,
    pub residual: f64,
    pub kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("no interior nul"));
}

fn fail(status: BrwStatus, message: impl Into<String>) -> BrwStatus {
    set_error(message);
    status
}

fn harness_status(e: HarnessError) -> BrwStatus {
    let status = match &e {
        HarnessError::Config(_) => BrwStatus::InvalidConfig,
        HarnessError::Conditions(_) => BrwStatus::ConditionsFailed,
        HarnessError::Io(_) | HarnessError::Format(_) => BrwStatus::Io,
        HarnessError::Engine(_) | HarnessError::Model(_) | HarnessError::ThreadPool(_) => {
            BrwStatus::Simulation
        }
    };
    fail(status, e.to_string())
}

fn model_status(e: ModelError) -> BrwStatus {
    fail(BrwStatus::InvalidArgument, e.to_string())
}

/// Runs `body`, turning panics into [`BrwStatus::Panic`].
fn guard(body: impl FnOnce() -> BrwStatus) -> BrwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == BrwStatus::Ok {
                set_error("");
            }
            status
        }
        Err(_) => fail(BrwStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, BrwStatus> {
    if s.is_null() {
        return Err(fail(BrwStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(BrwStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], BrwStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BrwStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], BrwStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(BrwStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failed call on this thread (empty after a success).
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn brw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn brw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML config document.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_config_from_toml(toml: *const c_char, out: *mut *mut BrwConfig) -> BrwStatus {
    guard(|| {
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let text = tri!(text(toml));
        match ExperimentConfig::from_toml(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(BrwConfig(config)));
                BrwStatus::Ok
            }
            Err(e) => harness_status(e),
        }
    })
}

/// Config of a builtin scenario.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_config_builtin(name: *const c_char, out: *mut *mut BrwConfig) -> BrwStatus {
    guard(|| {
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let name = tri!(text(name));
        match harness::scenario(name) {
            Some(config) => {
                *out = Box::into_raw(Box::new(BrwConfig(config)));
                BrwStatus::Ok
            }
            None => fail(BrwStatus::InvalidConfig, format!("unknown scenario `{name}`")),
        }
    })
}

/// # Safety
/// `config` must come from a `brw_config_*` constructor (or be null).
#[no_mangle]
pub unsafe extern "C" fn brw_config_free(config: *mut BrwConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn config_mut<'a>(config: *mut BrwConfig) -> Result<&'a mut ExperimentConfig, BrwStatus> {
    config
        .as_mut()
        .map(|c| &mut c.0)
        .ok_or_else(|| fail(BrwStatus::NullPointer, "null config"))
}

unsafe fn config_ref<'a>(config: *const BrwConfig) -> Result<&'a ExperimentConfig, BrwStatus> {
    config
        .as_ref()
        .map(|c| &c.0)
        .ok_or_else(|| fail(BrwStatus::NullPointer, "null config"))
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn brw_config_set_seed(config: *mut BrwConfig, seed: u64) -> BrwStatus {
    guard(|| {
        tri!(config_mut(config)).seed = seed;
        BrwStatus::Ok
    })
}

/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn brw_config_set_replicates(config: *mut BrwConfig, replicates: u64) -> BrwStatus {
    guard(|| {
        if replicates == 0 {
            return fail(BrwStatus::InvalidConfig, "replicates must be at least 1");
        }
        tri!(config_mut(config)).replicates = replicates;
        BrwStatus::Ok
    })
}

/// Output directory used when a run writes artifacts.
///
/// # Safety
/// `config` must be a live config handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn brw_config_set_output_dir(config: *mut BrwConfig, dir: *const c_char) -> BrwStatus {
    guard(|| {
        let dir = tri!(text(dir));
        tri!(config_mut(config)).output_dir = dir.into();
        BrwStatus::Ok
    })
}

/// Writes the 64 hex digits of the config digest and a nul into `buf`.
///
/// # Safety
/// `config` must be a live handle and `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn brw_config_digest(config: *const BrwConfig, buf: *mut c_char, len: usize) -> BrwStatus {
    guard(|| {
        let digest = tri!(config_ref(config)).digest();
        if buf.is_null() {
            return fail(BrwStatus::NullPointer, "null buffer");
        }
        if len < digest.len() + 1 {
            return fail(BrwStatus::BufferTooSmall, format!("need {} bytes", digest.len() + 1));
        }
        ptr::copy_nonoverlapping(digest.as_ptr().cast(), buf, digest.len());
        *buf.add(digest.len()) = 0;
        BrwStatus::Ok
    })
}

/// Contraction constant `kappa = m(alpha theta) / m(theta)^alpha` of the config's law.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_config_kappa(config: *const BrwConfig, out: *mut f64) -> BrwStatus {
    guard(|| {
        let c = tri!(config_ref(config));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        match models::kappa(&c.law, c.theta, c.alpha) {
            Ok(k) => {
                *out = k;
                BrwStatus::Ok
            }
            Err(e) => model_status(e),
        }
    })
}

/// Simulates and verifies. `threads = 0` uses the default pool. Artifacts are
/// written to the config's output directory when `write_artifacts` is set.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_run(
    config: *const BrwConfig,
    threads: u32,
    override_conditions: bool,
    write_artifacts: bool,
    out: *mut *mut BrwReport,
) -> BrwStatus {
    guard(|| {
        let c = tri!(config_ref(config));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let options = RunOptions {
            threads: (threads > 0).then_some(threads as usize),
            override_conditions,
            write_artifacts,
        };
        match harness::run_scenario(c, &options) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(BrwReport(report)));
                BrwStatus::Ok
            }
            Err(e) => harness_status(e),
        }
    })
}

/// # Safety
/// `report` must come from [`brw_run`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn brw_report_free(report: *mut BrwReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

unsafe fn report_ref<'a>(report: *const BrwReport) -> Result<&'a RunReport, BrwStatus> {
    report
        .as_ref()
        .map(|r| &r.0)
        .ok_or_else(|| fail(BrwStatus::NullPointer, "null report"))
}

/// Whether every enabled check passed.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_report_pass(report: *const BrwReport, out: *mut bool) -> BrwStatus {
    guard(|| {
        let r = tri!(report_ref(report));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        *out = r.pass;
        BrwStatus::Ok
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_report_counts(report: *const BrwReport, out: *mut BrwCounts) -> BrwStatus {
    guard(|| {
        let r = tri!(report_ref(report));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let c = r.counts;
        *out = BrwCounts {
            replicates: c.replicates,
            extinct: c.extinct,
            capped: c.capped,
            used: c.used,
        };
        BrwStatus::Ok
    })
}

/// Number of checks in the report.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_report_check_count(report: *const BrwReport, out: *mut usize) -> BrwStatus {
    guard(|| {
        let r = tri!(report_ref(report));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        *out = r.checks.len();
        BrwStatus::Ok
    })
}

/// The report as a JSON string; release it with [`brw_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_report_json(report: *const BrwReport, out: *mut *mut c_char) -> BrwStatus {
    guard(|| {
        let r = tri!(report_ref(report));
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let json = match serde_json::to_string(r) {
            Ok(s) => s,
            Err(e) => return fail(BrwStatus::Io, e.to_string()),
        };
        *out = CString::new(json).expect("JSON has no nul").into_raw();
        BrwStatus::Ok
    })
}

/// # Safety
/// `s` must come from a `brw_*` function that documents this release (or be null).
#[no_mangle]
pub unsafe extern "C" fn brw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn stable_spec(alpha: f64, c: f64) -> Result<StableSpec, BrwStatus> {
    StableSpec::new(alpha, c).map_err(|e| fail(BrwStatus::InvalidArgument, e.to_string()))
}

unsafe fn fill(
    t: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
    f: impl Fn(f64) -> num_complex::Complex64,
) -> BrwStatus {
    let t = tri!(slice(t, len));
    let re = tri!(slice_mut(re, len));
    let im = tri!(slice_mut(im, len));
    for (i, &x) in t.iter().enumerate() {
        let z = f(x);
        re[i] = z.re;
        im[i] = z.im;
    }
    BrwStatus::Ok
}

/// Characteristic function of the innovation law at each of the `len` points `t`.
///
/// # Safety
/// `t`, `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn brw_cf_q(
    alpha: f64,
    c: f64,
    t: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
) -> BrwStatus {
    guard(|| {
        let spec = tri!(stable_spec(alpha, c));
        fill(t, len, re, im, |x| stablelim::cf_q(&spec, x))
    })
}

/// Characteristic function of the stationary AR(1) marginal with `phi = kappa^(1/alpha)`.
///
/// # Safety
/// `t`, `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn brw_cf_u0(
    alpha: f64,
    c: f64,
    kappa: f64,
    t: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
) -> BrwStatus {
    guard(|| {
        let spec = tri!(stable_spec(alpha, c));
        let ar = tri!(ArSpec::from_kappa(kappa, spec)
            .map_err(|e| fail(BrwStatus::InvalidArgument, e.to_string())));
        fill(t, len, re, im, |x| stablelim::cf_u0(&ar, x))
    })
}

/// Scale-mixture characteristic function over the `n_weights` mixing weights.
///
/// # Safety
/// `weights` must hold `n_weights` doubles; `t`, `re` and `im` must hold `len`.
#[no_mangle]
pub unsafe extern "C" fn brw_mixture_cf(
    alpha: f64,
    c: f64,
    kappa: f64,
    weights: *const f64,
    n_weights: usize,
    t: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
) -> BrwStatus {
    guard(|| {
        let spec = tri!(stable_spec(alpha, c));
        let w = tri!(slice(weights, n_weights));
        if let Err(e) = stablelim::mixture_cf(&spec, kappa, w, 0.0) {
            return fail(BrwStatus::InvalidArgument, e.to_string());
        }
        fill(t, len, re, im, |x| {
            stablelim::mixture_cf(&spec, kappa, w, x).expect("validated above")
        })
    })
}

/// Solves `m(theta) = target` for `K ~ Pareto(k_tail)` of mean `k_mean` on
/// `{k_min, k_min + 1, ...}`, `Y ~ Exp(y_rate)` and the given lattice spacing.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brw_calibrate_infinite(
    k_tail: f64,
    k_min: u64,
    k_mean: f64,
    y_rate: f64,
    spacing: f64,
    target: f64,
    alpha: f64,
    out: *mut BrwCalibration,
) -> BrwStatus {
    guard(|| {
        if out.is_null() {
            return fail(BrwStatus::NullPointer, "null output pointer");
        }
        let k_law = tri!(DiscretePareto::with_mean(k_tail, k_min, k_mean).map_err(model_status));
        let y_law = DisplacementLaw::Exponential { rate: y_rate };
        let cal = tri!(models::calibrate_infinite_example(&k_law, &y_law, spacing, target)
            .map_err(model_status));
        let law = models::OffspringLaw::InfinitePoints {
            k_law,
            y_law,
            spacing,
        };
        let kappa = tri!(models::kappa(&law, cal.theta, alpha).map_err(model_status));
        *out = BrwCalibration {
            theta: cal.theta,
            spacing: cal.spacing,
            m_theta: cal.m_theta,
            residual: cal.residual,
            kappa,
        };
        BrwStatus::Ok
    })
}
