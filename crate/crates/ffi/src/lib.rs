//! C ABI over the `hybridscope` library.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns an [`HsStatus`]; on failure
//! [`hs_last_error`] describes the most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use hybridscope::cache::{self, Algorithm, ReplacementPolicy};
use hybridscope::concentration;
use hybridscope::stats;
use hybridscope::trace::{open_trace, parse_trace, split_by_volume, TraceSchema, Workload};
use hybridscope::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    CapacityInfeasible = 4,
    IoError = 5,
    Empty = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsAlgorithm {
    Lru = 0,
    Arc = 1,
}

impl From<HsAlgorithm> for Algorithm {
    fn from(a: HsAlgorithm) -> Self {
        match a {
            HsAlgorithm::Lru => Algorithm::Lru,
            HsAlgorithm::Arc => Algorithm::Arc,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HsCacheResult {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
}

impl From<cache::CacheResult> for HsCacheResult {
    fn from(r: cache::CacheResult) -> Self {
        HsCacheResult { accesses: r.accesses, hits: r.hits, misses: r.misses, hit_ratio: r.hit_ratio }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HsSummary {
    pub read_count: u64,
    pub write_count: u64,
    pub total_count: u64,
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub footprint_bytes: u64,
    pub first_ts_us: u64,
    pub last_ts_us: u64,
}

/// Parsed trace, split by volume in ascending volume order.
pub struct HsTrace {
    workloads: Vec<Workload>,
    ids: Vec<CString>,
    skipped: u64,
}

/// Stand-alone page cache fed one page at a time.
pub struct HsCache {
    policy: Box<dyn ReplacementPolicy + Send>,
    accesses: u64,
    hits: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: HsStatus, msg: impl Into<String>) -> HsStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::MalformedLine { .. } | Error::InvalidSchema(_) | Error::InvalidSpec(_) => HsStatus::ParseError,
        Error::CapacityInfeasible { .. } => HsStatus::CapacityInfeasible,
        Error::Io(_) => HsStatus::IoError,
        Error::InvalidConfig(_) => HsStatus::InvalidArgument,
        Error::EmptyWorkload | Error::EmptySeries | Error::NoActivity | Error::EmptySlice => HsStatus::Empty,
    }
}

fn from_error(e: Error) -> HsStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, turning a panic into `HsStatus::Internal`.
fn guard(f: impl FnOnce() -> HsStatus) -> HsStatus {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(HsStatus::Internal, "internal error"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, HsStatus> {
    if p.is_null() {
        return Err(fail(HsStatus::NullPointer, "null path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(HsStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn workload<'a>(trace: *const HsTrace, index: usize) -> Result<&'a Workload, HsStatus> {
    let t = trace.as_ref().ok_or_else(|| fail(HsStatus::NullPointer, "null trace handle"))?;
    t.workloads
        .get(index)
        .ok_or_else(|| fail(HsStatus::InvalidArgument, format!("volume index {index} out of range")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread. Empty when nothing has failed yet.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a trace file (`.gz` allowed). `schema_path` may be null for the
/// default comma-separated layout. With `strict` set, a malformed line fails
/// the load; otherwise such lines are skipped and counted.
///
/// # Safety
/// `path` and a non-null `schema_path` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_load(
    path: *const c_char,
    schema_path: *const c_char,
    strict: bool,
    out: *mut *mut HsTrace,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let schema = if schema_path.is_null() {
            TraceSchema::default()
        } else {
            let sp = match path_arg(schema_path) {
                Ok(p) => p,
                Err(s) => return s,
            };
            match TraceSchema::from_config_file(sp) {
                Ok(s) => s,
                Err(e) => return from_error(e),
            }
        };
        let reader = match open_trace(path) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let mut parser = parse_trace(reader, &schema, strict);
        let records: Result<Vec<_>, Error> = parser.by_ref().collect();
        let records = match records {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let skipped = parser.skipped();
        let workloads: Vec<Workload> = split_by_volume(records).into_values().collect();
        let ids = workloads
            .iter()
            .map(|w| CString::new(w.volume_id().replace('\0', " ")).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(HsTrace { workloads, ids, skipped }));
        HsStatus::Ok
    })
}

/// # Safety
/// `trace` must come from [`hs_trace_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_free(trace: *mut HsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_volume_count(trace: *const HsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.workloads.len())
}

/// Lines skipped as malformed during a lenient load.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_skipped_lines(trace: *const HsTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.skipped)
}

/// Volume id at `index`, owned by the handle. Null when out of range.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_volume_id(trace: *const HsTrace, index: usize) -> *const c_char {
    trace
        .as_ref()
        .and_then(|t| t.ids.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_summary(trace: *const HsTrace, index: usize, out: *mut HsSummary) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "null output pointer");
        }
        let w = match workload(trace, index) {
            Ok(w) => w,
            Err(s) => return s,
        };
        match stats::summarize(w) {
            Ok(s) => {
                *out = HsSummary {
                    read_count: s.read_count,
                    write_count: s.write_count,
                    total_count: s.total_count,
                    read_bytes: s.read_bytes,
                    write_bytes: s.write_bytes,
                    footprint_bytes: s.footprint_bytes,
                    first_ts_us: s.first_ts_us,
                    last_ts_us: s.last_ts_us,
                };
                HsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Replays one volume through a cache sized at `size_fraction` of its
/// footprint.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_hit_ratio(
    trace: *const HsTrace,
    index: usize,
    algorithm: HsAlgorithm,
    size_fraction: f64,
    page_size_bytes: u64,
    out: *mut HsCacheResult,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "null output pointer");
        }
        let w = match workload(trace, index) {
            Ok(w) => w,
            Err(s) => return s,
        };
        match cache::hit_ratio_curve(w, algorithm.into(), &[size_fraction], page_size_bytes) {
            Ok(c) => {
                *out = c.points[0].result.into();
                HsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Average share of the `k` busiest macro pages per slice, written to
/// `out[0..k]`.
///
/// # Safety
/// `trace` must be a live handle; `out` must have room for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_share_profile(
    trace: *const HsTrace,
    index: usize,
    macro_page_bytes: u64,
    interval_s: u64,
    k: usize,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "null output pointer");
        }
        if k == 0 {
            return fail(HsStatus::InvalidArgument, "k must be positive");
        }
        let w = match workload(trace, index) {
            Ok(w) => w,
            Err(s) => return s,
        };
        let profile = concentration::slice_page_counts(w, macro_page_bytes, interval_s)
            .and_then(|s| concentration::top_page_share_profile(&s, k));
        match profile {
            Ok(p) => {
                std::slice::from_raw_parts_mut(out, k).copy_from_slice(&p);
                HsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Smallest size fraction after which no larger size gains `epsilon_pp`
/// percentage points or more. `*found` is false when no point qualifies.
///
/// # Safety
/// `fractions` and `hit_ratios` must hold `n` doubles; `out` and `found` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_convergence_point(
    fractions: *const f64,
    hit_ratios: *const f64,
    n: usize,
    epsilon_pp: f64,
    out: *mut f64,
    found: *mut bool,
) -> HsStatus {
    guard(|| {
        if fractions.is_null() || hit_ratios.is_null() || out.is_null() || found.is_null() {
            return fail(HsStatus::NullPointer, "null argument");
        }
        let fr = std::slice::from_raw_parts(fractions, n);
        let hr = std::slice::from_raw_parts(hit_ratios, n);
        if !fr.windows(2).all(|w| w[0] < w[1]) {
            return fail(HsStatus::InvalidArgument, "fractions must be strictly increasing");
        }
        let curve = cache::HitRatioCurve {
            algorithm: Algorithm::Lru,
            points: fr
                .iter()
                .zip(hr)
                .map(|(&size_fraction, &hit_ratio)| cache::CurvePoint {
                    size_fraction,
                    capacity_pages: 0,
                    result: cache::CacheResult { accesses: 0, hits: 0, misses: 0, hit_ratio },
                })
                .collect(),
        };
        let cp = cache::convergence_point(&curve, epsilon_pp);
        *found = cp.is_some();
        *out = cp.unwrap_or(0.0);
        HsStatus::Ok
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_cache_new(algorithm: HsAlgorithm, capacity_pages: usize, out: *mut *mut HsCache) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        if capacity_pages == 0 {
            return fail(HsStatus::InvalidArgument, "capacity must be at least one page");
        }
        let policy = Algorithm::from(algorithm).build(capacity_pages);
        *out = Box::into_raw(Box::new(HsCache { policy, accesses: 0, hits: 0 }));
        HsStatus::Ok
    })
}

/// # Safety
/// `cache` must come from [`hs_cache_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_cache_free(cache: *mut HsCache) {
    if !cache.is_null() {
        drop(Box::from_raw(cache));
    }
}

/// Accesses one page; `*hit` reports whether it was resident. `hit` may be
/// null.
///
/// # Safety
/// `cache` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_cache_access(cache: *mut HsCache, page_id: u64, hit: *mut bool) -> HsStatus {
    let Some(c) = cache.as_mut() else {
        return fail(HsStatus::NullPointer, "null cache handle");
    };
    let h = c.policy.access(page_id);
    c.accesses += 1;
    c.hits += u64::from(h);
    if !hit.is_null() {
        *hit = h;
    }
    HsStatus::Ok
}

/// # Safety
/// `cache` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_cache_result(cache: *const HsCache, out: *mut HsCacheResult) -> HsStatus {
    let Some(c) = cache.as_ref() else {
        return fail(HsStatus::NullPointer, "null cache handle");
    };
    if out.is_null() {
        return fail(HsStatus::NullPointer, "null output pointer");
    }
    *out = cache::CacheResult::from_counts(c.accesses, c.hits).into();
    HsStatus::Ok
}

/// Pages currently resident.
///
/// # Safety
/// `cache` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hs_cache_resident(cache: *const HsCache) -> usize {
    cache.as_ref().map_or(0, |c| c.policy.resident())
}
