//! C ABI for gridseg.
//!
//! Every fallible function returns a [`GsStatus`]; on failure a description
//! is available from [`gs_last_error`] on the same thread. Handles are
//! opaque and must be released with their `*_free` function. Panics never
//! cross the boundary; they are reported as `GS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gridseg::estimator::{algorithm1, algorithm2, coarse_init, ThresholdConfig};
use gridseg::inference::{infer, yao_quantile, Interval, MonteCarlo};
use gridseg::segtree::{quarterly_segmentation, reconstruct_means, tree_report, SegTree, SegmentationConfig};
use gridseg::{DataGrid, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    InferenceRefused = 4,
    Io = 5,
    Panic = 6,
}

/// Dense `tw x th x p` grid.
pub struct GsGrid(DataGrid);

/// Result of a quarterly segmentation.
pub struct GsTree(SegTree);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GsChangePoint {
    pub tau_w: usize,
    pub tau_h: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsInterval {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsInference {
    pub tau: GsChangePoint,
    pub vanishing_w: GsInterval,
    pub vanishing_h: GsInterval,
    pub nonvanishing_w: GsInterval,
    pub nonvanishing_h: GsInterval,
    pub xi_w2: f64,
    pub xi_h2: f64,
    pub sigma2_w: f64,
    pub sigma2_h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GsTreeCounts {
    pub change_points: usize,
    pub partitions: usize,
    pub depth: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: GsStatus, msg: impl Into<String>) -> GsStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> GsStatus {
    match err {
        Error::CellOutOfBounds { .. } | Error::ChangePointOutOfBounds { .. } => GsStatus::OutOfBounds,
        Error::InferenceRefused(_) => GsStatus::InferenceRefused,
        Error::Io(_) => GsStatus::Io,
        _ => GsStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), GsStatus>>(f: F) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(GsStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, GsStatus>;
}

impl<T> OrStatus<T> for gridseg::Result<T> {
    fn or_status(self) -> Result<T, GsStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, GsStatus> {
    p.as_ref().ok_or_else(|| fail(GsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, GsStatus> {
    p.as_mut().ok_or_else(|| fail(GsStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len = tw * th * p` values into a new grid. Values are ordered by
/// `w`, then `h`, then component (cell `(w, h)` starts at
/// `((w - 1) * th + (h - 1)) * p`).
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_grid_new(
    tw: usize,
    th: usize,
    p: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut GsGrid,
) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if values.is_null() {
            return Err(fail(GsStatus::NullPointer, "values is null"));
        }
        let expected = tw.checked_mul(th).and_then(|n| n.checked_mul(p));
        if expected != Some(len) {
            return Err(fail(GsStatus::InvalidArgument, format!("expected {tw}x{th}x{p} values, got {len}")));
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let grid = DataGrid::new(tw, th, p, data).or_status()?;
        *out = Box::into_raw(Box::new(GsGrid(grid)));
        Ok(())
    })
}

/// Reads a grid CSV with header `w,h,x1,...,xp`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_grid_read_csv(path: *const c_char, out: *mut *mut GsGrid) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(fail(GsStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(GsStatus::InvalidArgument, "path is not valid UTF-8"))?;
        let file = std::fs::File::open(Path::new(path)).map_err(|e| fail(GsStatus::Io, format!("{path}: {e}")))?;
        let grid = gridseg::io::read_grid_csv(std::io::BufReader::new(file)).or_status()?;
        *out = Box::into_raw(Box::new(GsGrid(grid)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_grid_free(grid: *mut GsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn gs_grid_dims(grid: *const GsGrid, tw: *mut usize, th: *mut usize, p: *mut usize) -> GsStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if let Some(x) = tw.as_mut() {
            *x = g.tw();
        }
        if let Some(x) = th.as_mut() {
            *x = g.th();
        }
        if let Some(x) = p.as_mut() {
            *x = g.p();
        }
        Ok(())
    })
}

/// Copies all values (same layout as [`gs_grid_new`]) into `buf`, which
/// must hold exactly `tw * th * p` doubles.
///
/// # Safety
/// `grid` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_grid_values(grid: *const GsGrid, buf: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if buf.is_null() {
            return Err(fail(GsStatus::NullPointer, "buf is null"));
        }
        let src = g.as_slice();
        if len != src.len() {
            return Err(fail(GsStatus::InvalidArgument, format!("buffer holds {len} values, grid has {}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
        Ok(())
    })
}

/// Single change point from the coarse 3x3 start. `algorithm` is 1
/// (two-step) or 2 (with boundary selection, tuned by `c_bic`).
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_estimate(grid: *const GsGrid, algorithm: u32, c_bic: f64, out: *mut GsChangePoint) -> GsStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let out = out_ptr(out, "out")?;
        let config = ThresholdConfig::default();
        let init = coarse_init(g, &config).or_status()?;
        let trace = match algorithm {
            1 => algorithm1(g, init, &config),
            2 => algorithm2(g, init, &config, c_bic),
            _ => return Err(fail(GsStatus::InvalidArgument, format!("unknown algorithm {algorithm}"))),
        }
        .or_status()?;
        *out = GsChangePoint {
            tau_w: trace.final_cp.tau_w,
            tau_h: trace.final_cp.tau_h,
        };
        Ok(())
    })
}

fn interval(i: Interval) -> GsInterval {
    GsInterval {
        lo: i.lo,
        hi: i.hi,
        margin: i.margin,
    }
}

/// Two-step estimate plus confidence intervals for both jump regimes.
/// Returns `GS_STATUS_INFERENCE_REFUSED` when the estimate lies on the
/// boundary or a directional jump is zero.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_infer(
    grid: *const GsGrid,
    alpha: f64,
    n_draws: usize,
    seed: u64,
    out: *mut GsInference,
) -> GsStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let out = out_ptr(out, "out")?;
        let config = ThresholdConfig::default();
        let init = coarse_init(g, &config).or_status()?;
        let trace = algorithm1(g, init, &config).or_status()?;
        let r = infer(g, &trace, alpha, MonteCarlo { n_draws, seed }).or_status()?;
        *out = GsInference {
            tau: GsChangePoint {
                tau_w: r.tau.tau_w,
                tau_h: r.tau.tau_h,
            },
            vanishing_w: interval(r.intervals.vanishing_w),
            vanishing_h: interval(r.intervals.vanishing_h),
            nonvanishing_w: interval(r.intervals.nonvanishing_w),
            nonvanishing_h: interval(r.intervals.nonvanishing_h),
            xi_w2: r.xi_w2,
            xi_h2: r.xi_h2,
            sigma2_w: r.sigma2_w,
            sigma2_h: r.sigma2_h,
        };
        Ok(())
    })
}

/// `q` with `P(|Z| <= q) = 1 - alpha` for the Brownian argmax limit.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_yao_quantile(alpha: f64, out: *mut f64) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = yao_quantile(alpha).or_status()?;
        Ok(())
    })
}

/// Quarterly segmentation with the default threshold grid.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_segment(
    grid: *const GsGrid,
    c_bic: f64,
    min_cells: usize,
    max_level: usize,
    out: *mut *mut GsTree,
) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let g = &deref(grid, "grid")?.0;
        let config = SegmentationConfig {
            threshold: ThresholdConfig::default(),
            c_bic,
            min_cells,
            max_level,
        };
        let tree = quarterly_segmentation(g, &config).or_status()?;
        *out = Box::into_raw(Box::new(GsTree(tree)));
        Ok(())
    })
}

/// # Safety
/// `tree` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_tree_free(tree: *mut GsTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// # Safety
/// `tree` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_tree_counts(tree: *const GsTree, out: *mut GsTreeCounts) -> GsStatus {
    guard(|| {
        let t = &deref(tree, "tree")?.0;
        let out = out_ptr(out, "out")?;
        let r = tree_report(t);
        *out = GsTreeCounts {
            change_points: r.change_points,
            partitions: r.partitions,
            depth: r.depth,
        };
        Ok(())
    })
}

/// Tree as a JSON document; release it with [`gs_string_free`].
///
/// # Safety
/// `tree` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_tree_json(tree: *const GsTree, out: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let t = &deref(tree, "tree")?.0;
        let json = serde_json::to_string(&tree_report(t)).map_err(|e| fail(GsStatus::InvalidArgument, e.to_string()))?;
        *out = CString::new(json)
            .map_err(|e| fail(GsStatus::InvalidArgument, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Piecewise-constant reconstruction of `grid` over the leaves of `tree`.
///
/// # Safety
/// `tree` and `grid` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_tree_reconstruct(tree: *const GsTree, grid: *const GsGrid, out: *mut *mut GsGrid) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let t = &deref(tree, "tree")?.0;
        let g = &deref(grid, "grid")?.0;
        let rec = reconstruct_means(g, t).or_status()?;
        *out = Box::into_raw(Box::new(GsGrid(rec)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
