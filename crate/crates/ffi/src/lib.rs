//! C interface to the deterministic parts of `gcan-fusion`: text cleaning,
//! the corpus graph, loss weights, voting, Mann-Whitney U and F1.
//!
//! Every function returns a [`GfStatus`]. On failure the message is kept
//! per thread and can be read with [`gf_last_error_message`]. Output
//! pointers are written only on success. Arrays are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gcan_fusion::ensemble::{f1_scores, hard_vote, mann_whitney_u, soft_vote, FoldRun};
use gcan_fusion::graph::{build_adjacency, count_windows, CorpusGraph};
use gcan_fusion::preprocess::{clean_text, tokenize, Vocabulary};
use gcan_fusion::training::class_weights;
use gcan_fusion::Error;
use ndarray::Array1;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Empty = 5,
    Parse = 6,
    Validation = 7,
    Dependency = 8,
    Checkpoint = 9,
    Io = 10,
    Utf8 = 11,
    Panic = 12,
}

impl From<&Error> for GfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => GfStatus::InvalidArgument,
            Error::Shape(_) => GfStatus::Shape,
            Error::NonFinite(_) => GfStatus::NonFinite,
            Error::Empty(_) => GfStatus::Empty,
            Error::Parse { .. } => GfStatus::Parse,
            Error::Validation(_) => GfStatus::Validation,
            Error::Dependency(_) => GfStatus::Dependency,
            Error::Checkpoint(_) => GfStatus::Checkpoint,
            Error::Io { .. } => GfStatus::Io,
        }
    }
}

/// Opaque corpus graph.
pub struct GfGraph {
    graph: CorpusGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Failure(GfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(GfStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            GfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GfStatus::Panic
        }
    }
}

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

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GfStatus::Utf8, format!("{what} is not valid UTF-8")))
}

fn checked_len(parts: &[usize], what: &str) -> Result<usize, Failure> {
    parts
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Failure(GfStatus::InvalidArgument, format!("{what} size overflows")))
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Cleans one text. The result must be released with [`gf_string_free`].
///
/// # Safety
/// `text` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_clean_text(text: *const c_char, out: *mut *mut c_char) -> GfStatus {
    guard(|| {
        let text = string(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cleaned = CString::new(clean_text(text)).map_err(|_| Failure(GfStatus::Utf8, "interior nul".into()))?;
        *out = cleaned.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn gf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the corpus graph over `n_docs` raw documents. Documents are
/// cleaned and tokenized the same way as in training.
///
/// # Safety
/// `docs` must hold `n_docs` nul-terminated strings and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_graph_build(
    docs: *const *const c_char,
    n_docs: usize,
    window_len: usize,
    min_freq: usize,
    out: *mut *mut GfGraph,
) -> GfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let docs = slice(docs, n_docs, "docs")?;
        let tokens = docs
            .iter()
            .map(|&d| string(d, "document").map(|t| tokenize(&clean_text(t))))
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocabulary::build(&tokens, min_freq, None)?;
        let corpus: Vec<Vec<u32>> = tokens.iter().map(|t| vocab.ids(t)).collect();
        let stats = count_windows(&corpus, window_len)?;
        let graph = build_adjacency(&corpus, &stats, &vocab)?;
        *out = Box::into_raw(Box::new(GfGraph { graph }));
        Ok(())
    })
}

/// Node counts: documents first, then words.
///
/// # Safety
/// `graph` must come from [`gf_graph_build`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_graph_size(graph: *const GfGraph, num_docs: *mut usize, num_words: *mut usize) -> GfStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if num_docs.is_null() || num_words.is_null() {
            return Err(null("output"));
        }
        *num_docs = g.graph.num_docs();
        *num_words = g.graph.num_words();
        Ok(())
    })
}

/// Entry `(i, j)` of the raw adjacency, or of the normalized one when
/// `normalized` is true.
///
/// # Safety
/// `graph` must come from [`gf_graph_build`] and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_graph_entry(
    graph: *const GfGraph,
    i: usize,
    j: usize,
    normalized: bool,
    out: *mut f64,
) -> GfStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = g.graph.num_docs() + g.graph.num_words();
        if i >= n || j >= n {
            return Err(Failure(GfStatus::InvalidArgument, format!("node ({i}, {j}) outside {n} nodes")));
        }
        let m = if normalized { g.graph.normalized() } else { g.graph.raw() };
        *out = m.get(i, j);
        Ok(())
    })
}

/// # Safety
/// `graph` must come from [`gf_graph_build`], or be null.
#[no_mangle]
pub unsafe extern "C" fn gf_graph_free(graph: *mut GfGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Inverse-support loss weights for the four sub-categories.
///
/// # Safety
/// `counts` must hold 4 values and `out` room for 4.
#[no_mangle]
pub unsafe extern "C" fn gf_class_weights(counts: *const u64, total: u64, out: *mut f64) -> GfStatus {
    guard(|| {
        let counts: [u64; 4] = slice(counts, 4, "counts")?.try_into().expect("length 4");
        let w = class_weights(&counts, total)?;
        slice_mut(out, 4, "out")?.copy_from_slice(&w.0);
        Ok(())
    })
}

/// F1-weighted soft vote. `probs` is `[folds][samples][classes]`, `f1`
/// has one entry per fold, `out` receives `[samples][classes]`.
///
/// # Safety
/// Buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn gf_soft_vote(
    probs: *const f64,
    f1: *const f64,
    folds: usize,
    samples: usize,
    classes: usize,
    out: *mut f64,
) -> GfStatus {
    guard(|| {
        let probs = slice(probs, checked_len(&[folds, samples, classes], "probs")?, "probs")?;
        let f1 = slice(f1, folds, "f1")?;
        let out = slice_mut(out, checked_len(&[samples, classes], "out")?, "out")?;
        let runs: Vec<FoldRun> = (0..folds)
            .map(|k| FoldRun {
                model: String::new(),
                fold: k,
                best_f1: f1[k],
                test_probs: (0..samples)
                    .map(|i| {
                        let at = (k * samples + i) * classes;
                        Array1::from(probs[at..at + classes].to_vec())
                    })
                    .collect(),
            })
            .collect();
        let voted = soft_vote(&runs)?;
        for (dst, p) in out.chunks_mut(classes.max(1)).zip(&voted.probs) {
            dst.copy_from_slice(p.as_slice().expect("contiguous"));
        }
        Ok(())
    })
}

/// Majority vote: a label is set iff at least half of the models set it.
/// `votes` is `[models][samples][classes]` of 0/1 bytes.
///
/// # Safety
/// Buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn gf_hard_vote(
    votes: *const u8,
    models: usize,
    samples: usize,
    classes: usize,
    out: *mut u8,
) -> GfStatus {
    guard(|| {
        let votes = slice(votes, checked_len(&[models, samples, classes], "votes")?, "votes")?;
        let out = slice_mut(out, checked_len(&[samples, classes], "out")?, "out")?;
        let nested: Vec<Vec<Vec<bool>>> = (0..models)
            .map(|m| {
                (0..samples)
                    .map(|i| {
                        let at = (m * samples + i) * classes;
                        votes[at..at + classes].iter().map(|&v| v != 0).collect()
                    })
                    .collect()
            })
            .collect();
        let voted = hard_vote(&nested)?;
        for (dst, v) in out.chunks_mut(classes.max(1)).zip(&voted) {
            for (d, &b) in dst.iter_mut().zip(v) {
                *d = b as u8;
            }
        }
        Ok(())
    })
}

/// Two-sided Mann-Whitney U test. `exact` is set to 1 when the p-value
/// came from full enumeration and 0 for the normal approximation.
///
/// # Safety
/// `x` and `y` must hold `nx` and `ny` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_mann_whitney_u(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    u: *mut f64,
    p_two_sided: *mut f64,
    exact: *mut u8,
) -> GfStatus {
    guard(|| {
        let x = slice(x, nx, "x")?;
        let y = slice(y, ny, "y")?;
        if u.is_null() || p_two_sided.is_null() || exact.is_null() {
            return Err(null("output"));
        }
        let r = mann_whitney_u(x, y)?;
        *u = r.u;
        *p_two_sided = r.p_two_sided;
        *exact = matches!(r.method, gcan_fusion::ensemble::UMethod::Exact) as u8;
        Ok(())
    })
}

/// Macro and support-weighted F1 over `[samples][classes]` 0/1 labels.
///
/// # Safety
/// Buffers must have the stated sizes; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_f1(
    pred: *const u8,
    truth: *const u8,
    samples: usize,
    classes: usize,
    macro_f1: *mut f64,
    weighted_f1: *mut f64,
) -> GfStatus {
    guard(|| {
        let len = checked_len(&[samples, classes], "labels")?;
        let rows = |p: &[u8]| -> Vec<Vec<bool>> {
            p.chunks(classes.max(1)).map(|r| r.iter().map(|&v| v != 0).collect()).collect()
        };
        let pred = rows(slice(pred, len, "pred")?);
        let truth = rows(slice(truth, len, "truth")?);
        if macro_f1.is_null() || weighted_f1.is_null() {
            return Err(null("output"));
        }
        let scores = f1_scores(&pred, &truth)?;
        *macro_f1 = scores.macro_f1;
        *weighted_f1 = scores.weighted_f1;
        Ok(())
    })
}
