//! C ABI over `al-regress`.
//!
//! Every fallible function returns an [`AlStatus`]; on failure a message is
//! kept per thread and can be read with [`al_last_error_message`]. Graphs and
//! models are opaque heap handles released with their `_free` function.
//! Matrices are passed row-major as `rows * cols` doubles; indices are
//! `size_t` row numbers into the feature matrix the graph was built from.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use al_regress::harness::{emit_report, run_experiment, ExperimentConfig, RegressionConfig, RegressionKind};
use al_regress::regression::{fit, rmse};
use al_regress::strategy::{select_ours_batch, select_ours_sequential, sequential_seed_set};
use al_regress::{Error, LinearModel, Manifest, Matrix, NnGraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    NotUnlabeled = 6,
    EmptyPool = 7,
    EnumerationLimit = 8,
    Panic = 9,
}

/// Uncertainty graph between a labeled set and an unlabeled pool.
pub struct AlGraph(NnGraph);

/// Fitted linear model `y = w·x + b`.
pub struct AlModel(LinearModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

struct Failure(AlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = status_of(&e);
        Failure(status, e.to_string())
    }
}

fn status_of(e: &Error) -> AlStatus {
    match e {
        Error::Io { .. } => AlStatus::Io,
        Error::Manifest(_) | Error::Parse { .. } | Error::CountMismatch { .. } => AlStatus::Parse,
        Error::DimensionMismatch { .. } => AlStatus::DimensionMismatch,
        Error::NotUnlabeled(_) => AlStatus::NotUnlabeled,
        Error::EmptyPool => AlStatus::EmptyPool,
        Error::EnumerationLimit(_) => AlStatus::EnumerationLimit,
        Error::Round { source, .. } | Error::Trial { source, .. } => status_of(source),
        _ => AlStatus::InvalidInput,
    }
}

fn null(what: &str) -> Failure {
    Failure(AlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AlStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(AlStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AlStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
            status
        }
    }
}

/// Empty slice for `len == 0`, so callers may pass NULL there.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize) -> Result<Matrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure(AlStatus::InvalidInput, "matrix size overflows".into()))?;
    Ok(Matrix::new(rows, cols, slice(data, len, "matrix data")?.to_vec())?)
}

unsafe fn graph<'a>(g: *const AlGraph) -> Result<&'a NnGraph, Failure> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(AlStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// without the terminator, or 0 if the last call succeeded.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn al_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_deref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds the graph over `features` (`rows x cols`) with the given labeled
/// and unlabeled row indices.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_build(
    features: *const f64,
    rows: usize,
    cols: usize,
    labeled: *const usize,
    n_labeled: usize,
    unlabeled: *const usize,
    n_unlabeled: usize,
    out_graph: *mut *mut AlGraph,
) -> AlStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        let m = matrix(features, rows, cols)?;
        let l = slice(labeled, n_labeled, "labeled")?;
        let u = slice(unlabeled, n_unlabeled, "unlabeled")?;
        let g = NnGraph::build(l, u, Arc::new(m))?;
        *out_graph = Box::into_raw(Box::new(AlGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn al_graph_free(g: *mut AlGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of unlabeled points; 0 for a NULL handle.
///
/// # Safety
/// `g` must be NULL or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn al_graph_pool_size(g: *const AlGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.unlabeled().len())
}

/// Copies the sorted unlabeled indices into `out_indices` (capacity `len`).
///
/// # Safety
/// `g` must be a live handle; `out_indices` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn al_graph_unlabeled(g: *const AlGraph, out_indices: *mut usize, len: usize) -> AlStatus {
    guard(|| {
        let g = graph(g)?;
        let pool = g.unlabeled();
        if len < pool.len() {
            return Err(Error::DimensionMismatch {
                expected: pool.len(),
                got: len,
            }
            .into());
        }
        slice_mut(out_indices, pool.len(), "out_indices")?.copy_from_slice(pool);
        Ok(())
    })
}

/// Sum of all edge weights.
///
/// # Safety
/// `g` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_total_uncertainty(g: *const AlGraph, out_value: *mut f64) -> AlStatus {
    guard(|| {
        *out(out_value, "out_value")? = graph(g)?.total_uncertainty();
        Ok(())
    })
}

/// Distance from unlabeled point `u` to its nearest labeled point.
///
/// # Safety
/// `g` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_theta(
    g: *const AlGraph,
    u: usize,
    out_nearest: *mut usize,
    out_theta: *mut f64,
) -> AlStatus {
    guard(|| {
        let g = graph(g)?;
        *out(out_nearest, "out_nearest")? = g.nn_of(u)?;
        *out(out_theta, "out_theta")? = g.theta(u)?;
        Ok(())
    })
}

/// Uncertainty reduction from labeling `u` alone.
///
/// # Safety
/// `g` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_q_single(g: *const AlGraph, u: usize, out_value: *mut f64) -> AlStatus {
    guard(|| {
        *out(out_value, "out_value")? = graph(g)?.q_single(u)?;
        Ok(())
    })
}

/// Uncertainty reduction from labeling the whole set at once.
///
/// # Safety
/// `g` must be a live handle; `set` must hold `len` indices.
#[no_mangle]
pub unsafe extern "C" fn al_graph_q_set(
    g: *const AlGraph,
    set: *const usize,
    len: usize,
    out_value: *mut f64,
) -> AlStatus {
    guard(|| {
        let s = slice(set, len, "set")?;
        *out(out_value, "out_value")? = graph(g)?.q_set(s)?;
        Ok(())
    })
}

/// Best single query; ties go to the smallest index.
///
/// # Safety
/// `g` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_select_sequential(
    g: *const AlGraph,
    out_index: *mut usize,
    out_score: *mut f64,
) -> AlStatus {
    guard(|| {
        let trace = select_ours_sequential(graph(g)?)?;
        *out(out_index, "out_index")? = trace.chosen[0];
        *out(out_score, "out_score")? = trace.score;
        Ok(())
    })
}

/// Batch of `k` queries by single-swap local search from the greedy seed set.
/// Writes `k` indices in ascending order.
///
/// # Safety
/// `g` must be a live handle; `out_indices` must hold `k` values.
#[no_mangle]
pub unsafe extern "C" fn al_graph_select_batch(
    g: *const AlGraph,
    k: usize,
    out_indices: *mut usize,
    out_score: *mut f64,
) -> AlStatus {
    guard(|| {
        let g = graph(g)?;
        let seed = sequential_seed_set(g, k)?;
        let trace = select_ours_batch(g, k, &seed)?;
        let mut chosen = trace.chosen;
        chosen.sort_unstable();
        slice_mut(out_indices, k, "out_indices")?.copy_from_slice(&chosen);
        *out(out_score, "out_score")? = trace.score;
        Ok(())
    })
}

/// New graph with `set` moved from the pool to the labeled side; `g` is unchanged.
///
/// # Safety
/// `g` must be a live handle; `set` must hold `len` indices; `out_graph` writable.
#[no_mangle]
pub unsafe extern "C" fn al_graph_commit(
    g: *const AlGraph,
    set: *const usize,
    len: usize,
    out_graph: *mut *mut AlGraph,
) -> AlStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        let next = graph(g)?.commit(slice(set, len, "set")?)?;
        *out_graph = Box::into_raw(Box::new(AlGraph(next)));
        Ok(())
    })
}

/// Least squares (`alpha = 0`, minimum norm) or ridge fit with an
/// unpenalized intercept.
///
/// # Safety
/// `x` must hold `rows * cols` values, `y` `rows` values; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn al_model_fit(
    x: *const f64,
    rows: usize,
    cols: usize,
    y: *const f64,
    alpha: f64,
    out_model: *mut *mut AlModel,
) -> AlStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        let m = matrix(x, rows, cols)?;
        let (model, _) = fit(&m, slice(y, rows, "y")?, alpha)?;
        *out_model = Box::into_raw(Box::new(AlModel(model)));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn al_model_free(m: *mut AlModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of weights; 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn al_model_dim(m: *const AlModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// # Safety
/// `m` must be a live handle; `out_weights` must hold `al_model_dim(m)` values.
#[no_mangle]
pub unsafe extern "C" fn al_model_coefficients(
    m: *const AlModel,
    out_weights: *mut f64,
    out_bias: *mut f64,
) -> AlStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| null("model"))?.0;
        slice_mut(out_weights, m.dim(), "out_weights")?.copy_from_slice(&m.weights);
        *out(out_bias, "out_bias")? = m.bias;
        Ok(())
    })
}

/// # Safety
/// `x` must hold `rows * cols` values and `out_pred` `rows` values.
#[no_mangle]
pub unsafe extern "C" fn al_model_predict(
    m: *const AlModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out_pred: *mut f64,
) -> AlStatus {
    guard(|| {
        let m = &m.as_ref().ok_or_else(|| null("model"))?.0;
        let pred = m.predict(&matrix(x, rows, cols)?)?;
        slice_mut(out_pred, rows, "out_pred")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `pred` and `truth` must hold `len` values; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn al_rmse(pred: *const f64, truth: *const f64, len: usize, out_value: *mut f64) -> AlStatus {
    guard(|| {
        let p = slice(pred, len, "pred")?;
        let t = slice(truth, len, "truth")?;
        *out(out_value, "out_value")? = rmse(p, t)?;
        Ok(())
    })
}

/// Runs the default benchmark (all strategies, 10 rounds of 2 %, exact
/// labels, linear regression) on one manifest dataset and writes the CSV
/// reports into `out_dir`.
///
/// # Safety
/// String arguments must be NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn al_run_experiment(
    manifest_path: *const c_char,
    dataset: *const c_char,
    trials: usize,
    seed: u64,
    out_dir: *const c_char,
) -> AlStatus {
    guard(|| {
        let manifest = Manifest::from_path(Path::new(string(manifest_path, "manifest_path")?))?;
        let entry = manifest.get(string(dataset, "dataset")?)?.clone();
        let mut config = ExperimentConfig::new(entry, RegressionConfig::new(RegressionKind::Linear));
        config.trials = trials;
        config.base_seed = seed;
        let report = run_experiment(&config)?;
        emit_report(&report, Path::new(string(out_dir, "out_dir")?))?;
        Ok(())
    })
}
