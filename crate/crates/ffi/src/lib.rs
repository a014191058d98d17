//! C interface to `itersup`.
//!
//! Every fallible call returns an [`ItersupStatus`]; on failure the message
//! is available from [`itersup_last_error`] on the same thread. Objects
//! that own Rust data are opaque handles freed with their `_free` function.
//! Optional scalar inputs take `NaN` for "not given".

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use itersup::mc_sup::{estimate_tail, Mesh, TailEstimate, TailRequest};
use itersup::paths::{Covariance, ProcessSpec, VarianceFn};
use itersup::pickands::{pickands_constant, PickandsConfig};
use itersup::tail_fit::fit_beta_given_alpha;
use itersup::weibull::{
    fbm_sup_unit_interval, iterated_fbm_sup, normal_upper_tail, randomized_sup_transform, PickandsValue,
    PowerLawVariance, Strictness, WeibullTail,
};
use itersup::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItersupStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    MissingPickands = 3,
    NotPositiveDefinite = 4,
    InsufficientData = 5,
    Unsupported = 6,
    Config = 7,
    OutOfRange = 8,
    Panic = 9,
    Other = 10,
}

/// `P(T > u) ~ C u^gamma exp(-beta u^alpha)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItersupTail {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub big_c: f64,
}

impl From<WeibullTail> for ItersupTail {
    fn from(t: WeibullTail) -> Self {
        Self { alpha: t.alpha, beta: t.beta, gamma: t.gamma, big_c: t.big_c }
    }
}

impl ItersupTail {
    fn to_rust(self) -> Result<WeibullTail, Error> {
        WeibullTail::new(self.alpha, self.beta, self.gamma, self.big_c)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItersupBetaFit {
    pub beta_hat: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `NaN` when `C` was held fixed.
    pub big_c_hat: f64,
    pub n_points: usize,
}

/// A process usable as either side of `X(Y(s))`.
pub struct ItersupProcess(ProcessSpec);

/// Tail probabilities at a set of thresholds.
pub struct ItersupTailEstimate(TailEstimate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ItersupStatus {
    match e {
        Error::Domain(_) => ItersupStatus::Domain,
        Error::MissingPickands { .. } => ItersupStatus::MissingPickands,
        Error::NotPositiveDefinite { .. } => ItersupStatus::NotPositiveDefinite,
        Error::InsufficientData(_) | Error::DegenerateLevel { .. } => ItersupStatus::InsufficientData,
        Error::Unsupported(_) => ItersupStatus::Unsupported,
        Error::Config(_) => ItersupStatus::Config,
        _ => ItersupStatus::Other,
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> ItersupStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ItersupStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            ItersupStatus::Panic
        }
    }
}

macro_rules! require {
    ($p:expr, $name:literal) => {
        if $p.is_null() {
            set_error(format!("null pointer: {}", $name));
            return ItersupStatus::NullPointer;
        }
    };
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn itersup_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn itersup_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => panic!("bad version string"),
    };
    VERSION.as_ptr()
}

/// `P(N > u)` for a standard normal `N`.
#[no_mangle]
pub extern "C" fn itersup_normal_upper_tail(u: f64) -> f64 {
    normal_upper_tail(u)
}

#[no_mangle]
pub unsafe extern "C" fn itersup_tail_eval(tail: *const ItersupTail, u: f64, out: *mut f64) -> ItersupStatus {
    require!(tail, "tail");
    require!(out, "out");
    let tail = *tail;
    guard(|| {
        *out = tail.to_rust()?.eval(u)?;
        Ok(())
    })
}

/// Tail of `sup_{[0,1]} B_h`; `pickands` is needed for `h < 1/2`.
#[no_mangle]
pub unsafe extern "C" fn itersup_fbm_sup_unit_interval(h: f64, pickands: f64, out: *mut ItersupTail) -> ItersupStatus {
    require!(out, "out");
    guard(|| {
        *out = fbm_sup_unit_interval(h, opt(pickands).map(PickandsValue::exact))?.tail.into();
        Ok(())
    })
}

/// Tail of `sup_{[0,T]} B_{h2}(B_{h1}(s))`.
#[no_mangle]
pub unsafe extern "C" fn itersup_iterated_fbm_sup(
    h1: f64,
    h2: f64,
    big_t: f64,
    pickands_h1: f64,
    pickands_h2: f64,
    out: *mut ItersupTail,
) -> ItersupStatus {
    require!(out, "out");
    guard(|| {
        let p1 = opt(pickands_h1).map(PickandsValue::exact);
        let p2 = opt(pickands_h2).map(PickandsValue::exact);
        *out = iterated_fbm_sup(h1, h2, big_t, p1, p2)?.tail.into();
        Ok(())
    })
}

/// Randomized supremum of a process with variance `big_d t^alpha_inf`.
#[no_mangle]
pub unsafe extern "C" fn itersup_randomized_sup_transform(
    tail: *const ItersupTail,
    big_d: f64,
    alpha_inf: f64,
    strict: bool,
    out: *mut ItersupTail,
) -> ItersupStatus {
    require!(tail, "tail");
    require!(out, "out");
    let tail = *tail;
    guard(|| {
        let v = PowerLawVariance::new(big_d, alpha_inf)?;
        let s = if strict { Strictness::Strict } else { Strictness::Formal };
        *out = randomized_sup_transform(&tail.to_rust()?, &v, s)?.tail.into();
        Ok(())
    })
}

/// Pickands constant `H_alpha`. With `estimate` false a known closed form
/// is returned (`std_err` 0); otherwise it is simulated.
#[no_mangle]
pub unsafe extern "C" fn itersup_pickands(
    alpha: f64,
    estimate: bool,
    horizon: f64,
    n_reps: u64,
    mesh: f64,
    seed: u64,
    value: *mut f64,
    std_err: *mut f64,
) -> ItersupStatus {
    require!(value, "value");
    guard(|| {
        let cfg = PickandsConfig { horizon, n_reps, mesh, seed, force_estimate: estimate, ..PickandsConfig::default() };
        let est = pickands_constant(alpha, &cfg)?;
        *value = est.value;
        if !std_err.is_null() {
            *std_err = est.std_err;
        }
        Ok(())
    })
}

fn boxed(spec: ProcessSpec) -> *mut ItersupProcess {
    match spec.validate() {
        Ok(()) => Box::into_raw(Box::new(ItersupProcess(spec))),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// fBm with Hurst index `hurst`; NULL on invalid input.
#[no_mangle]
pub extern "C" fn itersup_process_fbm(hurst: f64) -> *mut ItersupProcess {
    boxed(ProcessSpec::Fbm { hurst })
}

/// Stationary increments with variance `big_d t^alpha_inf`.
#[no_mangle]
pub extern "C" fn itersup_process_power_variance(big_d: f64, alpha_inf: f64) -> *mut ItersupProcess {
    match PowerLawVariance::new(big_d, alpha_inf) {
        Ok(v) => boxed(ProcessSpec::StationaryIncrements { variance: VarianceFn::PowerLaw(v) }),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Stationary with correlation `exp(-c |t|^alpha)`.
#[no_mangle]
pub extern "C" fn itersup_process_power_exponential(c: f64, alpha: f64) -> *mut ItersupProcess {
    boxed(ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c, alpha } })
}

/// The deterministic path `slope * t`.
#[no_mangle]
pub extern "C" fn itersup_process_linear(slope: f64) -> *mut ItersupProcess {
    boxed(ProcessSpec::Linear { slope })
}

#[no_mangle]
pub unsafe extern "C" fn itersup_process_free(p: *mut ItersupProcess) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Crude Monte Carlo estimate of `P(sup_{[0,horizon]} X(Y(s)) > u)` at the
/// `n_thresholds` ascending thresholds. Results do not depend on the
/// number of threads.
#[no_mangle]
pub unsafe extern "C" fn itersup_estimate_tail(
    x: *const ItersupProcess,
    y: *const ItersupProcess,
    horizon: f64,
    thresholds: *const f64,
    n_thresholds: usize,
    n_reps: u64,
    mesh: f64,
    seed: u64,
    out: *mut *mut ItersupTailEstimate,
) -> ItersupStatus {
    require!(x, "x");
    require!(y, "y");
    require!(out, "out");
    if thresholds.is_null() && n_thresholds > 0 {
        set_error("null pointer: thresholds".into());
        return ItersupStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let u = if n_thresholds == 0 { Vec::new() } else { std::slice::from_raw_parts(thresholds, n_thresholds).to_vec() };
    let (x, y) = (&(*x).0, &(*y).0);
    guard(|| {
        let est = estimate_tail(x, y, &TailRequest::new(horizon, u, n_reps, Mesh::uniform(mesh), seed))?;
        *out = Box::into_raw(Box::new(ItersupTailEstimate(est)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn itersup_tail_estimate_len(est: *const ItersupTailEstimate) -> usize {
    if est.is_null() {
        0
    } else {
        (*est).0.len()
    }
}

/// Row `i`: threshold, estimate and standard error. Any output pointer may
/// be NULL.
#[no_mangle]
pub unsafe extern "C" fn itersup_tail_estimate_get(
    est: *const ItersupTailEstimate,
    i: usize,
    u: *mut f64,
    p_hat: *mut f64,
    std_err: *mut f64,
) -> ItersupStatus {
    require!(est, "est");
    let e = &(*est).0;
    if i >= e.len() {
        set_error(format!("row {i} out of range (len {})", e.len()));
        return ItersupStatus::OutOfRange;
    }
    for (dst, v) in [(u, e.thresholds[i]), (p_hat, e.p_hat[i]), (std_err, e.std_err[i])] {
        if !dst.is_null() {
            *dst = v;
        }
    }
    ItersupStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn itersup_tail_estimate_free(est: *mut ItersupTailEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Fits `beta` with `alpha` and `gamma` fixed; `big_c` fixed unless NaN.
#[no_mangle]
pub unsafe extern "C" fn itersup_fit_beta(
    est: *const ItersupTailEstimate,
    alpha: f64,
    gamma: f64,
    big_c: f64,
    out: *mut ItersupBetaFit,
) -> ItersupStatus {
    require!(est, "est");
    require!(out, "out");
    let e = &(*est).0;
    guard(|| {
        let f = fit_beta_given_alpha(e, alpha, gamma, opt(big_c))?;
        *out = ItersupBetaFit {
            beta_hat: f.beta_hat,
            std_err: f.std_err,
            ci_lo: f.ci.lo,
            ci_hi: f.ci.hi,
            big_c_hat: f.big_c_hat.unwrap_or(f64::NAN),
            n_points: f.n_points,
        };
        Ok(())
    })
}
