//! C ABI for perclab.
//!
//! Every function returns an `int32_t` status (`PERCLAB_OK` or a negative error code) and
//! writes results through out-pointers. Configurations and cluster labellings are opaque
//! handles released with their `_free` function. The message of the last error on the
//! calling thread is available from `perclab_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use perclab::arms::{detect_arms, ArmQuery, ColourSequence};
use perclab::boxapprox::{verify_correspondence, Outcome};
use perclab::clusters::{find_clusters, ClusterSet};
use perclab::geom::Point;
use perclab::ising::{cutoff_magnetization, magnetization, TestFunction};
use perclab::lattice::{io, sample_bernoulli, sample_fk_ising, AnyConfig, LatticeKind, MeshSpec, Percolation};
use perclab::Error;

pub const PERCLAB_OK: i32 = 0;
pub const PERCLAB_ERR_NULL: i32 = -1;
pub const PERCLAB_ERR_CONFIG: i32 = -2;
pub const PERCLAB_ERR_PARAMETER: i32 = -3;
pub const PERCLAB_ERR_DOMAIN: i32 = -4;
pub const PERCLAB_ERR_FIT: i32 = -5;
pub const PERCLAB_ERR_FORMAT: i32 = -6;
pub const PERCLAB_ERR_IO: i32 = -7;
pub const PERCLAB_ERR_UTF8: i32 = -8;
pub const PERCLAB_ERR_KIND: i32 = -9;
pub const PERCLAB_ERR_PANIC: i32 = -10;

/// A sampled configuration (site percolation or FK-Ising).
pub struct PerclabConfig(AnyConfig);

/// Open clusters of one configuration.
pub struct PerclabClusters(ClusterSet);

/// Result of checking the box approximation on one configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PerclabVerdict {
    /// Whether E(ε, δ) holds.
    pub e: bool,
    /// 1 passed, 0 failed, -1 skipped because E fails.
    pub outcome: i32,
    pub good_count: u64,
    pub cluster_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => PERCLAB_ERR_CONFIG,
        Error::Parameter(_) => PERCLAB_ERR_PARAMETER,
        Error::Domain(_) => PERCLAB_ERR_DOMAIN,
        Error::Fit(_) => PERCLAB_ERR_FIT,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => PERCLAB_ERR_FORMAT,
        Error::Io(_) => PERCLAB_ERR_IO,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code(&e), e.to_string())
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PERCLAB_OK,
        Ok(Err(Fail(c, msg))) => {
            set_error(msg);
            c
        }
        Err(_) => {
            set_error("internal panic".into());
            PERCLAB_ERR_PANIC
        }
    }
}

fn null() -> Fail {
    Fail(PERCLAB_ERR_NULL, "null pointer argument".into())
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail(PERCLAB_ERR_UTF8, e.to_string()))
}

fn fk(cfg: &PerclabConfig) -> Result<&perclab::lattice::FkConfig, Fail> {
    match &cfg.0 {
        AnyConfig::Fk(c) => Ok(c),
        AnyConfig::Site(_) => Err(Fail(PERCLAB_ERR_KIND, "operation needs an FK-Ising configuration".into())),
    }
}

/// Static version string.
#[no_mangle]
pub extern "C" fn perclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL terminated, truncated to
/// `len`). Returns the full message length, or 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn perclab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Critical site percolation on the triangular lattice over Λ_k at mesh `eta`. A negative
/// `p` selects the critical value 1/2.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with `perclab_config_free`.
#[no_mangle]
pub unsafe extern "C" fn perclab_sample_site(eta: f64, k: f64, p: f64, seed: u64, sample_index: u64, out: *mut *mut PerclabConfig) -> i32 {
    guard(|| {
        let mut spec = MeshSpec::critical(LatticeKind::TriangularSite, eta, k, seed).with_sample(sample_index);
        if p >= 0.0 {
            spec = spec.with_p(p);
        }
        let cfg = sample_bernoulli(&spec)?;
        write(out, Box::into_raw(Box::new(PerclabConfig(AnyConfig::Site(cfg)))))
    })
}

/// FK-Ising on the square lattice after `sweeps` Swendsen–Wang sweeps. A negative `p`
/// selects the self-dual point.
///
/// # Safety
/// As `perclab_sample_site`.
#[no_mangle]
pub unsafe extern "C" fn perclab_sample_fk(eta: f64, k: f64, p: f64, seed: u64, sample_index: u64, sweeps: u64, out: *mut *mut PerclabConfig) -> i32 {
    guard(|| {
        let mut spec = MeshSpec::critical(LatticeKind::SquareFk, eta, k, seed).with_sample(sample_index);
        if p >= 0.0 {
            spec = spec.with_p(p);
        }
        let cfg = sample_fk_ising(&spec, sweeps)?;
        write(out, Box::into_raw(Box::new(PerclabConfig(AnyConfig::Fk(cfg)))))
    })
}

/// Reads a configuration from the binary sample format.
///
/// # Safety
/// `bytes` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn perclab_config_decode(bytes: *const u8, len: usize, out: *mut *mut PerclabConfig) -> i32 {
    guard(|| {
        if bytes.is_null() {
            return Err(null());
        }
        let cfg = match io::decode(std::slice::from_raw_parts(bytes, len))? {
            io::Decoded::Site(c) => AnyConfig::Site(c),
            io::Decoded::Fk(c) => AnyConfig::Fk(c),
        };
        write(out, Box::into_raw(Box::new(PerclabConfig(cfg))))
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn perclab_config_free(cfg: *mut PerclabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of lattice vertices in the region.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_config_vertex_count(cfg: *const PerclabConfig, out: *mut u64) -> i32 {
    guard(|| write(out, borrow(cfg)?.0.lattice().len() as u64))
}

/// Labels the open clusters of `cfg`.
///
/// # Safety
/// Pointers must be valid; release the result with `perclab_clusters_free`.
#[no_mangle]
pub unsafe extern "C" fn perclab_clusters_find(cfg: *const PerclabConfig, out: *mut *mut PerclabClusters) -> i32 {
    guard(|| {
        let cs = find_clusters(&borrow(cfg)?.0);
        write(out, Box::into_raw(Box::new(PerclabClusters(cs))))
    })
}

/// # Safety
/// `cs` must come from `perclab_clusters_find` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn perclab_clusters_free(cs: *mut PerclabClusters) {
    if !cs.is_null() {
        drop(Box::from_raw(cs));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_clusters_count(cs: *const PerclabClusters, out: *mut u64) -> i32 {
    guard(|| write(out, borrow(cs)?.0.len() as u64))
}

/// Vertex count and L∞ diameter of cluster `index`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_cluster_info(cs: *const PerclabClusters, index: u64, size: *mut u64, diameter: *mut f64) -> i32 {
    guard(|| {
        let cs = &borrow(cs)?.0;
        if index >= cs.len() as u64 {
            return Err(Fail(PERCLAB_ERR_DOMAIN, format!("cluster {index} out of range 0..{}", cs.len())));
        }
        let info = cs.info(index as usize);
        write(size, info.size as u64)?;
        write(diameter, info.diameter)
    })
}

/// Arm event around (cx, cy) between radii a < b. `kappa` and `kappa_hp` are strings of
/// 0/1 colours (1 = red); `side` is 1..4 for a half-plane sequence, 0 for none.
///
/// # Safety
/// Pointers must be valid; the strings NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn perclab_arm_event(cfg: *const PerclabConfig, cx: f64, cy: f64, a: f64, b: f64, kappa: *const c_char, side: u8, kappa_hp: *const c_char, out: *mut bool) -> i32 {
    guard(|| {
        let cfg = borrow(cfg)?;
        let kappa: ColourSequence = text(kappa)?.parse()?;
        let hp: ColourSequence = text(kappa_hp)?.parse()?;
        let q = ArmQuery { center: Point::new(cx, cy), a, b, kappa, kappa_hp: hp, side: (side != 0).then_some(side) };
        q.validate()?;
        write(out, detect_arms(&cfg.0, &q)?)
    })
}

/// Checks the ε-box approximation against the clusters of `cfg` at scales (ε, δ).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_verify_correspondence(cfg: *const PerclabConfig, eps: f64, delta: f64, out: *mut PerclabVerdict) -> i32 {
    guard(|| {
        let v = verify_correspondence(&borrow(cfg)?.0, eps, delta)?;
        let outcome = match v.outcome {
            Outcome::Passed => 1,
            Outcome::Failed(_) => 0,
            Outcome::Skipped => -1,
        };
        write(out, PerclabVerdict { e: v.e, outcome, good_count: v.good_count as u64, cluster_count: v.cluster_count as u64 })
    })
}

/// Φ^η(1_L) with L∞ half-width `l`, for an FK-Ising configuration.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_magnetization(cfg: *const PerclabConfig, l: f64, out: *mut f64) -> i32 {
    guard(|| write(out, magnetization(fk(borrow(cfg)?)?, &TestFunction::indicator(l))?))
}

/// Φ^η_ε(1_L): the signed sum over FK clusters of diameter at least ε.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn perclab_cutoff_magnetization(cfg: *const PerclabConfig, l: f64, eps: f64, out: *mut f64) -> i32 {
    guard(|| write(out, cutoff_magnetization(fk(borrow(cfg)?)?, &TestFunction::indicator(l), eps)?))
}

/// Two-sample Kolmogorov–Smirnov statistic.
///
/// # Safety
/// `x` and `y` must point to `nx` and `ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn perclab_ks_distance(x: *const f64, nx: usize, y: *const f64, ny: usize, out: *mut f64) -> i32 {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null());
        }
        let d = perclab::stats::ks_distance(std::slice::from_raw_parts(x, nx), std::slice::from_raw_parts(y, ny))?;
        write(out, d)
    })
}
