//! C ABI over the `voices` pipeline.
//!
//! Objects cross the boundary as opaque handles created by `voices_*`
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`VoicesStatus`]; on failure, [`voices_last_error`] describes the
//! most recent error on the calling thread. Configurations are passed as JSON
//! objects using the same keys as the TOML configuration sections; a null or
//! empty string selects the defaults.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use voices::cluster::{cluster, ClusterAssignment, ClusterConfig};
use voices::corpus::{join_dataset, load_embeddings, Dataset, EmbeddingFormat, JoinOptions};
use voices::dimred::{reduce, ReductionConfig};
use voices::synthpop::{make_paper_like_fixture, FixtureProfile};
use voices::validate::{validate, ValidateOptions};
use voices::{Error, ErrorKind, Matrix};

/// Result of every fallible call. The first four values match the CLI exit
/// codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoicesStatus {
    Ok = 0,
    /// Invalid configuration or argument.
    Usage = 1,
    /// Input data unreadable or inconsistent.
    Data = 2,
    /// No valid solution (for example fewer than two clusters).
    Degenerate = 3,
    /// A required pointer was null.
    NullArgument = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// A joined dataset, optionally with planted ground-truth labels.
pub struct VoicesDataset {
    dataset: Dataset,
    ground_truth: Option<Vec<i32>>,
}

/// A dense row-major matrix of doubles.
pub struct VoicesMatrix {
    values: Matrix,
}

/// Cluster labels plus model details.
pub struct VoicesAssignment {
    assignment: ClusterAssignment,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VoicesStatus {
    match e.kind() {
        ErrorKind::Usage => VoicesStatus::Usage,
        ErrorKind::Data => VoicesStatus::Data,
        ErrorKind::Degenerate => VoicesStatus::Degenerate,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VoicesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VoicesStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            VoicesStatus::NullArgument
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            VoicesStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::InvalidConfig(format!("{what} is not UTF-8"))))
}

unsafe fn json_arg<T: serde::de::DeserializeOwned + Default>(
    p: *const c_char,
    what: &'static str,
) -> Result<T, Failure> {
    if p.is_null() {
        return Ok(T::default());
    }
    let s = str_arg(p, what)?;
    if s.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(s)
        .map_err(|e| Failure::Core(Error::InvalidConfig(format!("{what}: {e}"))))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn out_ptr<T>(out: *mut *mut T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn voices_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads embeddings (CSV, or binary for a `.bin` path) and joins them with an
/// annotations JSONL file and a metadata CSV.
///
/// # Safety
/// Path arguments must be valid NUL-terminated strings; `out` must be a valid
/// pointer to write the new handle to.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_load(
    embeddings_path: *const c_char,
    annotations_path: *const c_char,
    metadata_path: *const c_char,
    strict: bool,
    out: *mut *mut VoicesDataset,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let e = Path::new(str_arg(embeddings_path, "embeddings_path")?);
        let a = Path::new(str_arg(annotations_path, "annotations_path")?);
        let m = Path::new(str_arg(metadata_path, "metadata_path")?);
        let emb = load_embeddings(e, EmbeddingFormat::from_path(e))?;
        let opts = JoinOptions {
            strict,
            label_set: None,
        };
        let dataset = join_dataset(emb, a, m, &opts)?;
        *out = Box::into_raw(Box::new(VoicesDataset {
            dataset,
            ground_truth: None,
        }));
        Ok(())
    })
}

/// Generates a built-in synthetic population (`"mbic"` or `"gwsd"`) with
/// ground-truth labels.
///
/// # Safety
/// `profile` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_fixture(
    profile: *const c_char,
    seed: u64,
    out: *mut *mut VoicesDataset,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let p: FixtureProfile = str_arg(profile, "profile")?
            .parse()
            .map_err(|e: String| Failure::Core(Error::InvalidConfig(e)))?;
        let generated = make_paper_like_fixture(p, seed)?;
        *out = Box::into_raw(Box::new(VoicesDataset {
            dataset: generated.dataset,
            ground_truth: Some(generated.ground_truth),
        }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_rows(ds: *const VoicesDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.dataset.rows())
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_dim(ds: *const VoicesDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.dataset.embeddings().dim())
}

/// Copies the planted group of each row into `out` (`len` must equal the row
/// count). Fails with `VOICES_STATUS_DATA` when the dataset has no ground
/// truth.
///
/// # Safety
/// `ds` must be a live handle and `out` must hold `len` integers.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_ground_truth(
    ds: *const VoicesDataset,
    out: *mut i32,
    len: usize,
) -> VoicesStatus {
    guard(|| {
        let d = handle(ds, "ds")?;
        let truth = d
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::Format {
                context: "dataset".into(),
                message: "no ground truth".into(),
            })?;
        copy_out(truth, out, len)
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_free(ds: *mut VoicesDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Copies a row-major `rows x cols` array into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voices_matrix_from_data(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut VoicesMatrix,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidConfig("rows * cols overflows".into()))?;
        let values = Matrix::from_vec(rows, cols, std::slice::from_raw_parts(data, n).to_vec())?;
        if let Some((row, col)) = values.first_non_finite() {
            return Err(Error::NonFinite { row, col }.into());
        }
        *out = Box::into_raw(Box::new(VoicesMatrix { values }));
        Ok(())
    })
}

/// The dataset's embeddings as a matrix.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voices_dataset_embeddings(
    ds: *const VoicesDataset,
    out: *mut *mut VoicesMatrix,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let d = handle(ds, "ds")?;
        *out = Box::into_raw(Box::new(VoicesMatrix {
            values: d.dataset.embeddings().values().clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_matrix_rows(m: *const VoicesMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.values.rows())
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_matrix_cols(m: *const VoicesMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.values.cols())
}

/// Copies the matrix row-major into `out`; `len` must equal rows * cols.
///
/// # Safety
/// `m` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn voices_matrix_copy(
    m: *const VoicesMatrix,
    out: *mut f64,
    len: usize,
) -> VoicesStatus {
    guard(|| copy_out(handle(m, "m")?.values.as_slice(), out, len))
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voices_matrix_free(m: *mut VoicesMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Reduces the dataset's embeddings. `config_json` uses the keys of the
/// `[reduce]` section.
///
/// # Safety
/// `ds` must be a live handle, `config_json` null or a valid string, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn voices_reduce(
    ds: *const VoicesDataset,
    config_json: *const c_char,
    out: *mut *mut VoicesMatrix,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let d = handle(ds, "ds")?;
        let cfg: ReductionConfig = json_arg(config_json, "config_json")?;
        let reduced = reduce(d.dataset.embeddings(), &cfg)?;
        *out = Box::into_raw(Box::new(VoicesMatrix {
            values: reduced.values,
        }));
        Ok(())
    })
}

/// Clusters the rows of `m`. `config_json` uses the keys of the `[cluster]`
/// section. A degenerate solution is still returned; check
/// [`voices_assignment_is_degenerate`].
///
/// # Safety
/// `m` must be a live handle, `config_json` null or a valid string, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn voices_cluster(
    m: *const VoicesMatrix,
    config_json: *const c_char,
    out: *mut *mut VoicesAssignment,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let m = handle(m, "m")?;
        let cfg: ClusterConfig = json_arg(config_json, "config_json")?;
        let assignment = cluster(&m.values, &cfg)?;
        *out = Box::into_raw(Box::new(VoicesAssignment { assignment }));
        Ok(())
    })
}

/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_assignment_len(a: *const VoicesAssignment) -> usize {
    a.as_ref().map_or(0, |a| a.assignment.labels.len())
}

/// Number of non-noise clusters.
///
/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_assignment_n_clusters(a: *const VoicesAssignment) -> usize {
    a.as_ref().map_or(0, |a| a.assignment.n_clusters)
}

/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voices_assignment_is_degenerate(a: *const VoicesAssignment) -> bool {
    a.as_ref().is_some_and(|a| a.assignment.is_degenerate())
}

/// Copies the labels (-1 for noise) into `out`; `len` must equal the row
/// count.
///
/// # Safety
/// `a` must be a live handle and `out` must hold `len` integers.
#[no_mangle]
pub unsafe extern "C" fn voices_assignment_labels(
    a: *const VoicesAssignment,
    out: *mut i32,
    len: usize,
) -> VoicesStatus {
    guard(|| copy_out(&handle(a, "a")?.assignment.labels, out, len))
}

/// # Safety
/// `a` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voices_assignment_free(a: *mut VoicesAssignment) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Validates an assignment and returns the report as a JSON string to be
/// released with [`voices_string_free`]. `space` is the matrix the metrics are
/// measured in; `options_json` uses the keys of the `[validate]` section. The
/// ARI is included when the dataset carries ground truth.
///
/// # Safety
/// Handles must be live, `options_json` null or a valid string, `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn voices_validate_json(
    ds: *const VoicesDataset,
    space: *const VoicesMatrix,
    a: *const VoicesAssignment,
    options_json: *const c_char,
    out_json: *mut *mut c_char,
) -> VoicesStatus {
    guard(|| {
        out_ptr(out_json, "out_json")?;
        let d = handle(ds, "ds")?;
        let m = handle(space, "space")?;
        let a = handle(a, "a")?;
        let opts: ValidateOptions = json_arg(options_json, "options_json")?;
        let report = validate(
            &m.values,
            &a.assignment.labels,
            &d.dataset,
            &opts,
            d.ground_truth.as_deref(),
        )?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        *out_json = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn voices_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    if len != src.len() {
        return Err(Error::InvalidConfig(format!(
            "output buffer holds {len} values, need {}",
            src.len()
        ))
        .into());
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    Ok(())
}
