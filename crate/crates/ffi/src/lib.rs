//! C ABI for `subrough`.
//!
//! Objects cross the boundary as opaque handles created by `sr_*_new` style
//! constructors and released with the matching `sr_*_free`. Every fallible
//! call returns an [`SrStatus`]; the message of the last failure on the
//! calling thread is available from [`sr_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subrough::capacity::{capacity, CapacityConfig};
use subrough::distance::{calibrated_gauge, control_distance, DistanceQuery, MetricHandle};
use subrough::fields::{builtin, SystemJson, VectorFieldSystem};
use subrough::gaussian::{FbmMethod, FbmSampler, FbmSpec};
use subrough::hitting::{hitting_probability, HitExperiment};
use subrough::Error;

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Dimension = 3,
    Domain = 4,
    Infeasible = 5,
    NotPositiveDefinite = 6,
    NonConvergence = 7,
    Config = 8,
    BufferTooSmall = 9,
    Internal = 10,
    Panic = 11,
}

/// A vector field system.
pub struct SrSystem(VectorFieldSystem);

/// A distance on the state space of a system, exact or gauge-backed.
pub struct SrMetric(MetricHandle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::Dimension(_) => SrStatus::Dimension,
        Error::Domain(_) | Error::NotLie { .. } | Error::OffGrid(_) | Error::Hormander { .. } => SrStatus::Domain,
        Error::Infeasible { .. } => SrStatus::Infeasible,
        Error::NotPositiveDefinite(_) => SrStatus::NotPositiveDefinite,
        Error::NonConvergence(_) | Error::Truncation { .. } => SrStatus::NonConvergence,
        Error::Config(_) | Error::Json(_) => SrStatus::Config,
        Error::Io(_) => SrStatus::Internal,
    }
}

struct Fail(SrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any failure and converts panics into `SrStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside subrough".into());
            SrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn system_ref<'a>(p: *const SrSystem) -> Result<&'a VectorFieldSystem, Fail> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| null("system"))
}

unsafe fn metric_ref<'a>(p: *const SrMetric) -> Result<&'a MetricHandle, Fail> {
    p.as_ref().map(|m| &m.0).ok_or_else(|| null("metric"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Looks up a built-in system (`elliptic1`, `elliptic2`, `heisenberg`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_system_builtin(name: *const c_char, out: *mut *mut SrSystem) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let sys = builtin(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(SrSystem(sys)));
        Ok(())
    })
}

/// Builds a system from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_system_from_json(json: *const c_char, out: *mut *mut SrSystem) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let j: SystemJson = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(SrSystem(VectorFieldSystem::from_json(&j)?)));
        Ok(())
    })
}

/// State dimension `n`, number of driving fields `d` and bracket depth.
///
/// # Safety
/// `sys` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn sr_system_dims(sys: *const SrSystem, n: *mut usize, d: *mut usize, lbar: *mut usize) -> SrStatus {
    guard(|| {
        let s = system_ref(sys)?;
        for (p, v) in [(n, s.n()), (d, s.d()), (lbar, s.lbar())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sr_system_free(sys: *mut SrSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Metric that solves the control problem on every query.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_metric_exact(sys: *const SrSystem, out: *mut *mut SrMetric) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SrMetric(MetricHandle::exact(system_ref(sys)?.clone()))));
        Ok(())
    })
}

/// Gauge metric calibrated against exact distances on `pairs` random pairs.
/// Fails with `Domain` when no gauge is registered for the system.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_metric_calibrated(
    sys: *const SrSystem,
    pairs: usize,
    seed: u64,
    out: *mut *mut SrMetric,
) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SrMetric(calibrated_gauge(system_ref(sys)?, pairs, seed)?)));
        Ok(())
    })
}

/// Calibration band `[lower, upper]` of exact distance over gauge. Both are
/// 1 for exact metrics.
///
/// # Safety
/// `metric` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sr_metric_band(metric: *const SrMetric, lower: *mut f64, upper: *mut f64) -> SrStatus {
    guard(|| {
        let m = metric_ref(metric)?;
        let (lo, hi) = m.calibration().map_or((1.0, 1.0), |c| (c.lower, c.upper));
        *out_arg(lower, "lower")? = lo;
        *out_arg(upper, "upper")? = hi;
        Ok(())
    })
}

/// Distance between two points of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `metric` must be live.
#[no_mangle]
pub unsafe extern "C" fn sr_metric_distance(
    metric: *const SrMetric,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let m = metric_ref(metric)?;
        let d = m.distance(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        *out_arg(out, "out")? = d;
        Ok(())
    })
}

/// # Safety
/// `metric` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sr_metric_free(metric: *mut SrMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Control distance with explicit solver settings. `residual` may be null.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `sys` must be live.
#[no_mangle]
pub unsafe extern "C" fn sr_control_distance(
    sys: *const SrSystem,
    x: *const f64,
    y: *const f64,
    n: usize,
    segments: usize,
    restarts: usize,
    seed: u64,
    value: *mut f64,
    residual: *mut f64,
) -> SrStatus {
    guard(|| {
        let s = system_ref(sys)?;
        let q = DistanceQuery {
            segments,
            restarts,
            seed,
            ..DistanceQuery::new(slice_arg(x, n, "x")?.to_vec(), slice_arg(y, n, "y")?.to_vec())
        };
        let r = control_distance(s, &q)?;
        *out_arg(value, "value")? = r.value;
        if let Some(p) = residual.as_mut() {
            *p = r.residual;
        }
        Ok(())
    })
}

/// Path `index` of the stream `seed`: a `dim`-dimensional fBM on `steps`
/// uniform steps of `[0, horizon]`, written time-major into `buf`, which
/// must hold `(steps + 1) * dim` doubles.
///
/// # Safety
/// `buf` must point to `buf_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sr_sample_fbm(
    hurst: f64,
    horizon: f64,
    steps: usize,
    dim: usize,
    seed: u64,
    index: u64,
    buf: *mut f64,
    buf_len: usize,
) -> SrStatus {
    guard(|| {
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = (steps + 1) * dim;
        if buf_len < need {
            return Err(Fail(SrStatus::BufferTooSmall, format!("buffer holds {buf_len} doubles, {need} needed")));
        }
        let sampler = FbmSampler::new(FbmSpec::uniform(hurst, horizon, steps, dim)?, FbmMethod::Circulant)?;
        let path = sampler.sample_indexed(seed, index);
        std::slice::from_raw_parts_mut(buf, need).copy_from_slice(path.values());
        Ok(())
    })
}

/// Newtonian capacity of index `alpha` of a point cloud (`count` points of
/// dimension `dim`, point-major) under `metric`, with default settings.
///
/// # Safety
/// `points` must point to `count * dim` doubles; `metric` must be live.
#[no_mangle]
pub unsafe extern "C" fn sr_capacity(
    metric: *const SrMetric,
    points: *const f64,
    count: usize,
    dim: usize,
    alpha: f64,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let m = metric_ref(metric)?;
        if dim == 0 {
            return Err(Fail(SrStatus::Dimension, "dim must be positive".into()));
        }
        let cloud: Vec<Vec<f64>> = slice_arg(points, count * dim, "points")?.chunks(dim).map(<[f64]>::to_vec).collect();
        let r = capacity(&cloud, &CapacityConfig::new(alpha, m.clone()))?;
        *out_arg(out, "out")? = r.value;
        Ok(())
    })
}

/// Hitting probability for an experiment given as JSON (fields `hurst`,
/// `window`, `center`, `radius`, `y0`, `n_paths`, `steps`, `seed`, optional
/// `horizon`). On success `*json_out` receives the result as JSON, to be
/// released with `sr_string_free`; `estimate` may be null.
///
/// # Safety
/// Handles must be live, `config` NUL-terminated and `json_out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_hitting_probability(
    sys: *const SrSystem,
    metric: *const SrMetric,
    config: *const c_char,
    estimate: *mut f64,
    json_out: *mut *mut c_char,
) -> SrStatus {
    guard(|| {
        let s = system_ref(sys)?;
        let m = metric_ref(metric)?;
        let out = out_arg(json_out, "json_out")?;
        let exp: HitExperiment = serde_json::from_str(str_arg(config, "config")?).map_err(Error::from)?;
        let r = hitting_probability(s, m, &exp)?;
        let text = serde_json::to_string(&r).map_err(Error::from)?;
        if let Some(p) = estimate.as_mut() {
            *p = r.estimate.estimate.estimate;
        }
        *out = CString::new(text).map_err(|e| Fail(SrStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}
