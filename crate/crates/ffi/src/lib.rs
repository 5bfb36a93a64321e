// SPDX-License-Identifier: Apache-2.0

//! C ABI over the chunklab library.
//!
//! Every fallible function returns a [`ClxStatus`]; on failure the message is
//! available from [`clx_last_error_message`] on the same thread. Strings
//! returned through `out` pointers are owned by the caller and must be
//! released with [`clx_string_free`]. Handles are released with their own
//! `*_free` function; passing NULL to any free function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use chunklab::chunking::{Chunk, ChunkMethod, ChunkParams, ChunkRecord, Chunker};
use chunklab::corpus::{Corpus, DefaultTokenizer, Tokenizer};
use chunklab::embedding::DeterministicEmbedder;
use chunklab::retrieval::{build_index, Bm25Params, Index, IndexMode};
use chunklab::runner::{run_grid, RunOptions};
use chunklab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Schema = 4,
    DuplicateId = 5,
    EmptyFile = 6,
    Domain = 7,
    Lookup = 8,
    Integrity = 9,
    Embedding = 10,
    Transport = 11,
    Generation = 12,
    Config = 13,
    UndefinedMetric = 14,
    IndexFormat = 15,
    Panic = 99,
}

/// Mean and percentile interval of a bootstrap.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClxMetricSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub level: f64,
}

/// Loaded documents.
pub struct ClxCorpus {
    inner: Corpus,
}

/// A searchable index, plus its chunks when built in-process.
pub struct ClxIndex {
    index: Index,
    chunks: Vec<Chunk>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ClxStatus {
    match e {
        Error::Io { .. } => ClxStatus::Io,
        Error::Schema { .. } => ClxStatus::Schema,
        Error::DuplicateId(_) => ClxStatus::DuplicateId,
        Error::EmptyFile(_) => ClxStatus::EmptyFile,
        Error::Domain(_) => ClxStatus::Domain,
        Error::Lookup(_) => ClxStatus::Lookup,
        Error::Integrity(_) => ClxStatus::Integrity,
        Error::Embedding { .. } => ClxStatus::Embedding,
        Error::Transport(_) => ClxStatus::Transport,
        Error::Generation(_) => ClxStatus::Generation,
        Error::Config(_) => ClxStatus::Config,
        Error::UndefinedMetric(_) => ClxStatus::UndefinedMetric,
        Error::IndexFormat(_) => ClxStatus::IndexFormat,
    }
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> ClxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClxStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is NULL"));
            ClxStatus::NullArgument
        }
        Ok(Err(Fail::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            ClxStatus::InvalidUtf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            ClxStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .unwrap_or_default()
        .into_raw()
}

unsafe fn f64_slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn summary(m: &chunklab::metrics::MetricSummary) -> ClxMetricSummary {
    ClxMetricSummary {
        mean: m.mean,
        ci_low: m.ci_low,
        ci_high: m.ci_high,
        n: m.n,
        bootstrap_b: m.bootstrap_b,
        seed: m.seed,
        level: m.level,
    }
}

/// Library version; static storage, do not free.
#[no_mangle]
pub extern "C" fn clx_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr() as *const c_char
}

/// Copy of the last error on this thread, or NULL. Free with `clx_string_free`.
#[no_mangle]
pub extern "C" fn clx_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn clx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Token count under the default tokenizer.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_count_tokens(text: *const c_char, out_count: *mut usize) -> ClxStatus {
    guard(|| {
        let t = str_arg(text, "text")?;
        *out_arg(out_count, "out_count")? = DefaultTokenizer.count_tokens(t);
        Ok(())
    })
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_normalize_answer(
    text: *const c_char,
    out: *mut *mut c_char,
) -> ClxStatus {
    guard(|| {
        let t = str_arg(text, "text")?;
        *out_arg(out, "out")? = owned(chunklab::metrics::normalize_answer(t));
        Ok(())
    })
}

/// Writes 1 when `predicted` matches any of the `n_gold` answers after normalization.
///
/// # Safety
/// `gold` must point to `n_gold` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn clx_exact_match(
    predicted: *const c_char,
    gold: *const *const c_char,
    n_gold: usize,
    out: *mut u8,
) -> ClxStatus {
    guard(|| {
        let p = str_arg(predicted, "predicted")?;
        if gold.is_null() && n_gold > 0 {
            return Err(Fail::Null("gold"));
        }
        let mut golds = Vec::with_capacity(n_gold);
        for i in 0..n_gold {
            golds.push(str_arg(*gold.add(i), "gold[i]")?.to_string());
        }
        if golds.is_empty() {
            return Err(Error::Domain("gold answers must be non-empty".into()).into());
        }
        *out_arg(out, "out")? = chunklab::metrics::exact_match(p, &golds);
        Ok(())
    })
}

/// `1 / (1 - r)` for overlap ratio `r` in [0, 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_expected_chunk_inflation(r: f64, out: *mut f64) -> ClxStatus {
    guard(|| {
        *out_arg(out, "out")? = chunklab::chunking::expected_chunk_inflation(r)?;
        Ok(())
    })
}

/// # Safety
/// `values` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_bootstrap_ci(
    values: *const f64,
    n: usize,
    resamples: usize,
    level: f64,
    seed: u64,
    out: *mut ClxMetricSummary,
) -> ClxStatus {
    guard(|| {
        let v = f64_slice(values, n, "values")?;
        let m = chunklab::metrics::bootstrap_ci(v, resamples, level, seed)?;
        *out_arg(out, "out")? = summary(&m);
        Ok(())
    })
}

/// Interval over the mean of `a[i] - b[i]`; `out_zero_in_interval` may be NULL.
///
/// # Safety
/// `a` and `b` must each point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_paired_delta_ci(
    a: *const f64,
    b: *const f64,
    n: usize,
    resamples: usize,
    level: f64,
    seed: u64,
    out: *mut ClxMetricSummary,
    out_zero_in_interval: *mut bool,
) -> ClxStatus {
    guard(|| {
        let va = f64_slice(a, n, "a")?;
        let vb = f64_slice(b, n, "b")?;
        let d = chunklab::metrics::paired_delta_ci(va, vb, resamples, level, seed)?;
        *out_arg(out, "out")? = summary(&d.summary);
        if let Some(z) = out_zero_in_interval.as_mut() {
            *z = d.zero_in_interval;
        }
        Ok(())
    })
}

/// Loads a documents JSONL file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_corpus_load(
    path: *const c_char,
    out: *mut *mut ClxCorpus,
) -> ClxStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let slot = out_arg(out, "out")?;
        let inner = Corpus::load(&PathBuf::from(p))?;
        *slot = Box::into_raw(Box::new(ClxCorpus { inner }));
        Ok(())
    })
}

/// Number of documents, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clx_corpus_len(corpus: *const ClxCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `corpus` must be NULL or a handle from `clx_corpus_load`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn clx_corpus_free(corpus: *mut ClxCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

fn chunk_corpus(
    corpus: &Corpus,
    method: &str,
    size: usize,
    overlap: f64,
) -> Result<Vec<Chunk>, Fail> {
    let method: ChunkMethod = method.parse()?;
    let params = ChunkParams::new(method, size, overlap)?;
    let embedder = DeterministicEmbedder::new(64, 0)?;
    Ok(
        Chunker::new(Arc::new(DefaultTokenizer), Default::default()).chunk_all(
            corpus.as_slice(),
            &params,
            Some(&embedder),
        )?,
    )
}

/// Chunks every document and writes the records, text inlined, as JSON Lines.
/// `method` is one of "token", "sentence", "semantic", "code".
///
/// # Safety
/// `corpus` must be a live handle, `method` a NUL-terminated string and `out_jsonl` writable.
#[no_mangle]
pub unsafe extern "C" fn clx_chunk_corpus(
    corpus: *const ClxCorpus,
    method: *const c_char,
    size: usize,
    overlap: f64,
    out_jsonl: *mut *mut c_char,
) -> ClxStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or(Fail::Null("corpus"))?;
        let m = str_arg(method, "method")?;
        let slot = out_arg(out_jsonl, "out_jsonl")?;
        let mut s = String::new();
        for ch in chunk_corpus(&c.inner, m, size, overlap)? {
            s.push_str(
                &serde_json::to_string(&ChunkRecord::from_chunk(&ch, true)).expect("record"),
            );
            s.push('\n');
        }
        *slot = owned(s);
        Ok(())
    })
}

/// Chunks the corpus and builds a BM25 index over the chunks.
///
/// # Safety
/// `corpus` must be a live handle, `method` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clx_index_build(
    corpus: *const ClxCorpus,
    method: *const c_char,
    size: usize,
    overlap: f64,
    out: *mut *mut ClxIndex,
) -> ClxStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or(Fail::Null("corpus"))?;
        let m = str_arg(method, "method")?;
        let slot = out_arg(out, "out")?;
        let chunks = chunk_corpus(&c.inner, m, size, overlap)?;
        let index = build_index(
            &chunks,
            IndexMode::Bm25 {
                tokenizer: &DefaultTokenizer,
                params: Bm25Params::default(),
            },
        )?;
        *slot = Box::into_raw(Box::new(ClxIndex { index, chunks }));
        Ok(())
    })
}

/// Loads an index file; the handle carries no chunk text.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clx_index_load(path: *const c_char, out: *mut *mut ClxIndex) -> ClxStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let slot = out_arg(out, "out")?;
        let index = Index::load(&PathBuf::from(p))?;
        *slot = Box::into_raw(Box::new(ClxIndex {
            index,
            chunks: Vec::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn clx_index_save(index: *const ClxIndex, path: *const c_char) -> ClxStatus {
    guard(|| {
        let ix = index.as_ref().ok_or(Fail::Null("index"))?;
        let p = str_arg(path, "path")?;
        ix.index.save(&PathBuf::from(p))?;
        Ok(())
    })
}

/// Number of indexed chunks, or 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn clx_index_len(index: *const ClxIndex) -> usize {
    index.as_ref().map_or(0, |ix| ix.index.num_chunks())
}

/// Top-`k` hits for a text query as a JSON array of `{"chunk_id", "score"}`,
/// plus `"text"` when the handle holds chunk text.
///
/// # Safety
/// `index` must be a live BM25 handle, `query` a NUL-terminated string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn clx_index_search(
    index: *const ClxIndex,
    query: *const c_char,
    k: usize,
    out_json: *mut *mut c_char,
) -> ClxStatus {
    guard(|| {
        let ix = index.as_ref().ok_or(Fail::Null("index"))?;
        let q = str_arg(query, "query")?;
        let slot = out_arg(out_json, "out_json")?;
        let qv = ix.index.vectorize_query(q, &DefaultTokenizer)?;
        let hits: Vec<serde_json::Value> = ix
            .index
            .search(&qv, k)
            .hits
            .into_iter()
            .map(|h| {
                let text = ix
                    .chunks
                    .iter()
                    .find(|c| c.chunk_id == h.chunk_id)
                    .map(|c| c.text.clone());
                let mut v = serde_json::json!({ "chunk_id": h.chunk_id, "score": h.score });
                if let Some(t) = text {
                    v["text"] = t.into();
                }
                v
            })
            .collect();
        *slot = owned(serde_json::Value::Array(hits).to_string());
        Ok(())
    })
}

/// # Safety
/// `index` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn clx_index_free(index: *mut ClxIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Resume from an existing `cells.jsonl`.
pub const CLX_RUN_RESUME: u32 = 1;
/// Force the offline stub generator.
pub const CLX_RUN_STUB_GENERATOR: u32 = 2;

/// Runs the experiment grid and writes report files into `out_dir`.
/// `out_cells` (may be NULL) receives the number of cells in the report.
///
/// # Safety
/// `config_path` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn clx_run_grid(
    config_path: *const c_char,
    out_dir: *const c_char,
    flags: u32,
    out_cells: *mut usize,
) -> ClxStatus {
    guard(|| {
        let cfg = str_arg(config_path, "config_path")?;
        let out = str_arg(out_dir, "out_dir")?;
        let opts = RunOptions {
            resume: flags & CLX_RUN_RESUME != 0,
            stub_generator: flags & CLX_RUN_STUB_GENERATOR != 0,
            ..RunOptions::default()
        };
        let report = run_grid(&PathBuf::from(cfg), &PathBuf::from(out), &opts)?;
        if let Some(n) = out_cells.as_mut() {
            *n = report.cells.len();
        }
        Ok(())
    })
}
