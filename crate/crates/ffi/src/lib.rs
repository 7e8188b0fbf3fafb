//! C ABI for dialect-refine: classifier inference, DFS/BLEU/chrF++, normalized
//! Levenshtein and BM25 example retrieval.
//!
//! Every fallible call returns a [`DrStatus`]; on failure a message is kept
//! per thread and read back with [`dr_last_error`]. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dialect_refine::classifier::{load_model, Classify, EmbeddingMode, Model};
use dialect_refine::corpus::normalized_levenshtein;
use dialect_refine::metrics::{bleu, chrf_pp, dfs_slices, BleuConfig};
use dialect_refine::retrieval::Bm25Index;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    Metric = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrEmbeddingMode {
    Logit = 0,
    Raw = 1,
}

impl From<DrEmbeddingMode> for EmbeddingMode {
    fn from(m: DrEmbeddingMode) -> Self {
        match m {
            DrEmbeddingMode::Logit => EmbeddingMode::Logit,
            DrEmbeddingMode::Raw => EmbeddingMode::Raw,
        }
    }
}

/// Loaded classifier or ensemble.
pub struct DrClassifier {
    model: Model,
    labels: Vec<CString>,
}

/// Loaded BM25 index.
pub struct DrBm25 {
    index: Bm25Index,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (DrStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DrStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DrStatus::Panic
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err((DrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| (DrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { ptr.as_mut() }.ok_or_else(|| (DrStatus::NullPointer, format!("{what} is null")))
}

fn handle<'a, T>(ptr: *const T) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles were created by this library and not yet freed.
    unsafe { ptr.as_ref() }.ok_or_else(|| (DrStatus::NullPointer, "handle is null".into()))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file written by `train` or `ensemble-search`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_load(path: *const c_char, out_handle: *mut *mut DrClassifier) -> DrStatus {
    guard(|| {
        let path = text(path, "path")?;
        let slot = out(out_handle, "out_handle")?;
        let model = load_model(Path::new(path)).map_err(|e| (DrStatus::Io, e.to_string()))?;
        let labels = model.labels().iter().map(|l| CString::new(l.as_str()).unwrap_or_default()).collect();
        *slot = Box::into_raw(Box::new(DrClassifier { model, labels }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`dr_classifier_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_free(h: *mut DrClassifier) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of labels, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live classifier handle.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_num_labels(h: *const DrClassifier) -> usize {
    h.as_ref().map_or(0, |c| c.labels.len())
}

/// Label `i` as a string owned by the handle, or null when out of range.
///
/// # Safety
/// `h` must be null or a live classifier handle.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_label(h: *const DrClassifier, i: usize) -> *const c_char {
    h.as_ref().and_then(|c| c.labels.get(i)).map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Writes the posterior into `posterior[0..len]` and the predicted label index.
///
/// # Safety
/// `posterior` must point to `len` writable doubles; `label_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_predict(
    h: *const DrClassifier,
    input: *const c_char,
    posterior: *mut f64,
    len: usize,
    label_out: *mut usize,
) -> DrStatus {
    guard(|| {
        let c = handle(h)?;
        let input = text(input, "text")?;
        if posterior.is_null() {
            return Err((DrStatus::NullPointer, "posterior is null".into()));
        }
        if len < c.labels.len() {
            return Err((DrStatus::BufferTooSmall, format!("need {} slots, got {len}", c.labels.len())));
        }
        let pred = c.model.predict_proba(input);
        std::slice::from_raw_parts_mut(posterior, pred.posterior.len()).copy_from_slice(&pred.posterior);
        if let Some(slot) = label_out.as_mut() {
            *slot = c.model.label_index(&pred.label).expect("predicted label is in the label set");
        }
        Ok(())
    })
}

/// DFS of hypothesis vs reference and source in the classifier's embedding space.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_classifier_dfs(
    h: *const DrClassifier,
    hypothesis: *const c_char,
    reference: *const c_char,
    source: *const c_char,
    mode: DrEmbeddingMode,
    dfs_out: *mut f64,
) -> DrStatus {
    guard(|| {
        let c = handle(h)?;
        let (hyp, rf, src) = (text(hypothesis, "hypothesis")?, text(reference, "reference")?, text(source, "source")?);
        let slot = out(dfs_out, "out")?;
        let e = |t: &str| c.model.embed(t, mode.into());
        *slot = dfs_slices(&e(hyp), &e(rf), &e(src), dialect_refine::metrics::DFS_EPSILON)
            .map_err(|e| (DrStatus::Metric, e.to_string()))?;
        Ok(())
    })
}

/// DFS over raw embedding vectors of length `dim`.
///
/// # Safety
/// Each vector must point to `dim` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_dfs(
    e_h: *const f64,
    e_r: *const f64,
    e_s: *const f64,
    dim: usize,
    epsilon: f64,
    dfs_out: *mut f64,
) -> DrStatus {
    guard(|| {
        if e_h.is_null() || e_r.is_null() || e_s.is_null() {
            return Err((DrStatus::NullPointer, "embedding is null".into()));
        }
        let slot = out(dfs_out, "out")?;
        let v = |p: *const f64| std::slice::from_raw_parts(p, dim);
        *slot = dfs_slices(v(e_h), v(e_r), v(e_s), epsilon).map_err(|e| (DrStatus::Metric, e.to_string()))?;
        Ok(())
    })
}

unsafe fn pair_metric(
    hypothesis: *const c_char,
    reference: *const c_char,
    score_out: *mut f64,
    f: impl FnOnce(&str, &str) -> Result<f64, String>,
) -> DrStatus {
    guard(|| {
        let (h, r) = (text(hypothesis, "hypothesis")?, text(reference, "reference")?);
        let slot = out(score_out, "out")?;
        *slot = f(h, r).map_err(|m| (DrStatus::Metric, m))?;
        Ok(())
    })
}

/// Sentence-level chrF++ (0–100).
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_chrf_pp(
    hypothesis: *const c_char,
    reference: *const c_char,
    score_out: *mut f64,
) -> DrStatus {
    pair_metric(hypothesis, reference, score_out, |h, r| chrf_pp(&[h], &[r]).map_err(|e| e.to_string()))
}

/// Sentence-level BLEU (0–100), whitespace tokens, floor smoothing.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_bleu(hypothesis: *const c_char, reference: *const c_char, score_out: *mut f64) -> DrStatus {
    pair_metric(hypothesis, reference, score_out, |h, r| {
        bleu(&[h], &[r], &BleuConfig::default()).map_err(|e| e.to_string())
    })
}

/// Normalized edit distance `2d / (|a| + |b| + d)` over characters.
///
/// # Safety
/// Strings must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_normalized_levenshtein(
    a: *const c_char,
    b: *const c_char,
    distance_out: *mut f64,
) -> DrStatus {
    pair_metric(a, b, distance_out, |a, b| Ok(normalized_levenshtein(a, b)))
}

/// Loads a BM25 index written by `index`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dr_bm25_load(path: *const c_char, out_handle: *mut *mut DrBm25) -> DrStatus {
    guard(|| {
        let path = text(path, "path")?;
        let slot = out(out_handle, "out_handle")?;
        let index = Bm25Index::load(Path::new(path)).map_err(|e| (DrStatus::Io, e.to_string()))?;
        let ids = index.docs.iter().map(|d| CString::new(d.id.as_str()).unwrap_or_default()).collect();
        *slot = Box::into_raw(Box::new(DrBm25 { index, ids }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`dr_bm25_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_bm25_free(h: *mut DrBm25) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of indexed documents, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live index handle.
#[no_mangle]
pub unsafe extern "C" fn dr_bm25_len(h: *const DrBm25) -> usize {
    h.as_ref().map_or(0, |b| b.ids.len())
}

/// Id of document `doc`, owned by the handle; null when out of range.
///
/// # Safety
/// `h` must be null or a live index handle.
#[no_mangle]
pub unsafe extern "C" fn dr_bm25_doc_id(h: *const DrBm25, doc: usize) -> *const c_char {
    h.as_ref().and_then(|b| b.ids.get(doc)).map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Top-`k` documents for `query`. Writes up to `k` document numbers and
/// scores and the number written to `count_out`.
///
/// # Safety
/// `docs_out` and `scores_out` must point to `k` writable slots.
#[no_mangle]
pub unsafe extern "C" fn dr_bm25_top_k(
    h: *const DrBm25,
    query: *const c_char,
    k: usize,
    docs_out: *mut usize,
    scores_out: *mut f64,
    count_out: *mut usize,
) -> DrStatus {
    guard(|| {
        let b = handle(h)?;
        let query = text(query, "query")?;
        let count = out(count_out, "count_out")?;
        if k == 0 {
            return Err((DrStatus::InvalidArgument, "k must be at least 1".into()));
        }
        if docs_out.is_null() || scores_out.is_null() {
            return Err((DrStatus::NullPointer, "output buffer is null".into()));
        }
        let hits = b.index.top_k(query, k);
        let docs = std::slice::from_raw_parts_mut(docs_out, k);
        let scores = std::slice::from_raw_parts_mut(scores_out, k);
        for (i, hit) in hits.iter().enumerate() {
            docs[i] = b.index.docs.binary_search_by(|d| d.id.as_str().cmp(&hit.record.id)).expect("hit is indexed");
            scores[i] = hit.score;
        }
        *count = hits.len();
        Ok(())
    })
}
