// Copyright 2026 The ctxalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! C ABI for ctxalign.
//!
//! Objects cross the boundary as opaque handles created by `*_load`/`*_fit`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`CtxStatus`]; on failure the message is available from
//! [`ctx_last_error`] on the same thread until the next failing call.
//! Panics never unwind into C: they are caught and reported as
//! [`CtxStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ctxalign::align::{rotation_apply, rotation_fit, Mapper, RotationMap};
use ctxalign::corpus::{load_parallel_corpus, ParallelCorpus};
use ctxalign::embed::{load_embeddings, write_embeddings, ContextualEmbeddingSet};
use ctxalign::pipeline::{self, RunConfig};
use ctxalign::retrieval::{build_pool, evaluate, retrieve, RetrievalConfig, RetrievalMode, RetrievalReport, Similarity, DEFAULT_BLOCK,
};
use ctxalign::{Error, ErrorClass};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericError = 4,
    Panic = 5,
}

/// Similarity codes accepted by [`ctx_evaluate`] and [`ctx_retrieve`].
pub const CTX_SIM_COSINE: i32 = 0;
pub const CTX_SIM_CSLS: i32 = 1;
/// Retrieval mode codes accepted by [`ctx_evaluate`].
pub const CTX_MODE_CONTEXTUAL: i32 = 0;
pub const CTX_MODE_NON_CONTEXTUAL: i32 = 1;

/// Bidirectional retrieval accuracy.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CtxRetrievalSummary {
    pub mean_accuracy: f64,
    pub src_to_tgt: f64,
    pub tgt_to_src: f64,
    pub evaluated: u64,
}

/// Per-token contextual vectors for one side of a corpus.
pub struct CtxEmbeddings(ContextualEmbeddingSet);
/// A tokenized parallel corpus with word pairs.
pub struct CtxCorpus(ParallelCorpus);
/// An orthogonal map.
pub struct CtxRotation(RotationMap);
/// A fine-tuned vector mapper.
pub struct CtxMapper(Mapper);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CtxStatus, String);

fn status_of(class: ErrorClass) -> CtxStatus {
    match class {
        ErrorClass::Usage => CtxStatus::InvalidArgument,
        ErrorClass::Data => CtxStatus::DataError,
        ErrorClass::Numeric => CtxStatus::NumericError,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(e.class()), e.to_string())
    }
}

fn summary(r: &RetrievalReport) -> CtxRetrievalSummary {
    CtxRetrievalSummary {
        mean_accuracy: r.mean_accuracy,
        src_to_tgt: r.src_to_tgt.accuracy,
        tgt_to_src: r.tgt_to_src.accuracy,
        evaluated: r.src_to_tgt.evaluated as u64,
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CtxStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtxStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CtxStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(CtxStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

/// # Safety
/// `p` must be NULL or a valid NUL-terminated string.
unsafe fn str_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    nonnull(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` must be NULL or a live handle of type `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    nonnull(p, what)?;
    Ok(&*p)
}

/// # Safety
/// `out` must be NULL or writable.
unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    nonnull(out, "output pointer")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn similarity(code: i32) -> Result<Similarity, Failure> {
    match code {
        CTX_SIM_COSINE => Ok(Similarity::Cosine),
        CTX_SIM_CSLS => Ok(Similarity::Csls),
        other => Err(invalid(format!("unknown similarity code {other}"))),
    }
}

fn mode(code: i32) -> Result<RetrievalMode, Failure> {
    match code {
        CTX_MODE_CONTEXTUAL => Ok(RetrievalMode::Contextual),
        CTX_MODE_NON_CONTEXTUAL => Ok(RetrievalMode::NonContextual),
        other => Err(invalid(format!("unknown retrieval mode code {other}"))),
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CTXE embeddings file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_load(path: *const c_char, out: *mut *mut CtxEmbeddings) -> CtxStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        put(out, CtxEmbeddings(load_embeddings(&path)?))
    })
}

/// Builds embeddings from a row-major buffer of `total_tokens × dim`
/// values, split into sentences by `lengths[0..num_sentences]`.
///
/// # Safety
/// `data` must hold `dim × sum(lengths)` doubles, `lengths` must hold
/// `num_sentences` entries, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_from_buffer(
    data: *const f64,
    dim: usize,
    lengths: *const usize,
    num_sentences: usize,
    out: *mut *mut CtxEmbeddings,
) -> CtxStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let lengths: &[usize] = if num_sentences == 0 {
            &[]
        } else {
            nonnull(lengths, "lengths")?;
            std::slice::from_raw_parts(lengths, num_sentences)
        };
        let total = lengths
            .iter()
            .try_fold(0usize, |a, &n| a.checked_add(n))
            .and_then(|n| n.checked_mul(dim))
            .ok_or_else(|| invalid("buffer size overflows"))?;
        let flat: &[f64] = if total == 0 {
            &[]
        } else {
            nonnull(data, "data")?;
            std::slice::from_raw_parts(data, total)
        };
        let mut set = ContextualEmbeddingSet::new(dim);
        let mut at = 0;
        for &n in lengths {
            set.push_flat(&flat[at..at + n * dim])?;
            at += n * dim;
        }
        put(out, CtxEmbeddings(set))
    })
}

/// Writes embeddings in the CTXE format.
///
/// # Safety
/// `emb` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_save(emb: *const CtxEmbeddings, path: *const c_char) -> CtxStatus {
    guard(|| {
        let emb = handle(emb, "embeddings")?;
        Ok(write_embeddings(&emb.0, &path_arg(path, "path")?)?)
    })
}

/// Vector dimension, or 0 for NULL.
///
/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_dim(emb: *const CtxEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.0.dim())
}

/// Number of sentences, or 0 for NULL.
///
/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_num_sentences(emb: *const CtxEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.0.num_sentences())
}

/// Number of token vectors, or 0 for NULL.
///
/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_total_tokens(emb: *const CtxEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.0.total_tokens())
}

/// Copies the vector of one token into `out[0..dim]`.
///
/// # Safety
/// `emb` must be a live handle and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_vector(
    emb: *const CtxEmbeddings,
    sentence: usize,
    token: usize,
    out: *mut f64,
) -> CtxStatus {
    guard(|| {
        let e = &handle(emb, "embeddings")?.0;
        nonnull(out, "out")?;
        if sentence >= e.num_sentences() || token >= e.token_count(sentence) {
            return Err(invalid(format!("token {sentence}:{token} out of range")));
        }
        let v = e.vector(sentence, token);
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
        Ok(())
    })
}

/// # Safety
/// `emb` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctx_embeddings_free(emb: *mut CtxEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Loads a tokenized parallel corpus and its Pharaoh word pairs.
///
/// # Safety
/// All strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_corpus_load(
    src_text: *const c_char,
    tgt_text: *const c_char,
    pairs: *const c_char,
    src_language: *const c_char,
    tgt_language: *const c_char,
    out: *mut *mut CtxCorpus,
) -> CtxStatus {
    guard(|| {
        let corpus = load_parallel_corpus(
            &path_arg(src_text, "src_text")?,
            &path_arg(tgt_text, "tgt_text")?,
            &path_arg(pairs, "pairs")?,
            &str_arg(src_language, "src_language")?,
            &str_arg(tgt_language, "tgt_language")?,
        )?;
        put(out, CtxCorpus(corpus))
    })
}

/// Number of sentence pairs, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_corpus_len(corpus: *const CtxCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Number of word pairs, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_corpus_num_pairs(corpus: *const CtxCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.num_pairs())
}

/// # Safety
/// `corpus` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctx_corpus_free(corpus: *mut CtxCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Fits the orthogonal map taking source word-pair vectors onto their
/// target counterparts.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_fit(
    src: *const CtxEmbeddings,
    tgt: *const CtxEmbeddings,
    corpus: *const CtxCorpus,
    out: *mut *mut CtxRotation,
) -> CtxStatus {
    guard(|| {
        let w = rotation_fit(
            &handle(src, "src")?.0,
            &handle(tgt, "tgt")?.0,
            &handle(corpus, "corpus")?.0,
        )?;
        put(out, CtxRotation(w))
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_load(path: *const c_char, out: *mut *mut CtxRotation) -> CtxStatus {
    guard(|| {
        let w = RotationMap::load(&path_arg(path, "path")?)?;
        put(out, CtxRotation(w))
    })
}

/// # Safety
/// `w` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_save(w: *const CtxRotation, path: *const c_char) -> CtxStatus {
    guard(|| Ok(handle(w, "rotation")?.0.save(&path_arg(path, "path")?)?))
}

/// Copies the `dim × dim` matrix, row-major, into `out`.
///
/// # Safety
/// `w` must be a live handle and `out` must hold `dim²` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_matrix(w: *const CtxRotation, out: *mut f64) -> CtxStatus {
    guard(|| {
        let m = handle(w, "rotation")?.0.matrix();
        nonnull(out, "out")?;
        let n = m.rows();
        for i in 0..n {
            for j in 0..n {
                *out.add(i * n + j) = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Matrix dimension, or 0 for NULL.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_dim(w: *const CtxRotation) -> usize {
    w.as_ref().map_or(0, |w| w.0.dim())
}

/// Applies the rotation to every vector, producing new embeddings.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_apply(
    w: *const CtxRotation,
    emb: *const CtxEmbeddings,
    out: *mut *mut CtxEmbeddings,
) -> CtxStatus {
    guard(|| {
        let mapped = rotation_apply(&handle(w, "rotation")?.0, &handle(emb, "embeddings")?.0)?;
        put(out, CtxEmbeddings(mapped))
    })
}

/// # Safety
/// `w` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctx_rotation_free(w: *mut CtxRotation) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_mapper_load(path: *const c_char, out: *mut *mut CtxMapper) -> CtxStatus {
    guard(|| {
        let m = Mapper::load(&path_arg(path, "path")?)?;
        put(out, CtxMapper(m))
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_mapper_apply(
    m: *const CtxMapper,
    emb: *const CtxEmbeddings,
    out: *mut *mut CtxEmbeddings,
) -> CtxStatus {
    guard(|| {
        let mapped = handle(m, "mapper")?.0.apply_set(&handle(emb, "embeddings")?.0)?;
        put(out, CtxEmbeddings(mapped))
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctx_mapper_free(m: *mut CtxMapper) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Bidirectional word retrieval over the corpus's word pairs.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctx_evaluate(
    src: *const CtxEmbeddings,
    tgt: *const CtxEmbeddings,
    corpus: *const CtxCorpus,
    sim: i32,
    k: usize,
    mode_code: i32,
    out: *mut CtxRetrievalSummary,
) -> CtxStatus {
    guard(|| {
        let cfg = RetrievalConfig {
            sim: similarity(sim)?,
            k,
            mode: mode(mode_code)?,
            ..RetrievalConfig::default()
        };
        let r = evaluate(&handle(src, "src")?.0, &handle(tgt, "tgt")?.0, &handle(corpus, "corpus")?.0, &cfg)?;
        nonnull(out, "out")?;
        *out = summary(&r);
        Ok(())
    })
}

/// Nearest candidate for each query row. `queries` is `num_queries × dim`
/// and `candidates` is `num_candidates × dim`, both row-major. Writes the
/// winning candidate row and its score for every query.
///
/// # Safety
/// Buffers must have the stated sizes; `out_index` and `out_score` must
/// hold `num_queries` entries.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ctx_retrieve(
    queries: *const f64,
    num_queries: usize,
    candidates: *const f64,
    num_candidates: usize,
    dim: usize,
    sim: i32,
    k: usize,
    out_index: *mut usize,
    out_score: *mut f64,
) -> CtxStatus {
    guard(|| {
        let sim = similarity(sim)?;
        if dim == 0 || num_queries == 0 || num_candidates == 0 {
            return Err(invalid("dim and both pool sizes must be positive"));
        }
        nonnull(queries, "queries")?;
        nonnull(candidates, "candidates")?;
        nonnull(out_index, "out_index")?;
        nonnull(out_score, "out_score")?;
        let as_set = |p: *const f64, n: usize| -> Result<ContextualEmbeddingSet, Failure> {
            let len = n.checked_mul(dim).ok_or_else(|| invalid("buffer size overflows"))?;
            let mut s = ContextualEmbeddingSet::new(dim);
            s.push_flat(std::slice::from_raw_parts(p, len))?;
            Ok(s)
        };
        let q = build_pool(&as_set(queries, num_queries)?)?;
        let c = build_pool(&as_set(candidates, num_candidates)?)?;
        let matches = retrieve(&q, &c, sim, k, DEFAULT_BLOCK)?;
        for (i, m) in matches.iter().enumerate() {
            *out_index.add(i) = m.index;
            *out_score.add(i) = m.score;
        }
        Ok(())
    })
}

/// Runs the full pipeline from a JSON config. `out_dir` may be NULL to
/// use the config's output directory. `out` may be NULL; otherwise it
/// receives the post-alignment summary (or the base one when the config
/// does not align).
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_dir` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ctx_run_pipeline(
    config_json: *const c_char,
    out_dir: *const c_char,
    out: *mut CtxRetrievalSummary,
) -> CtxStatus {
    guard(|| {
        let mut cfg = RunConfig::from_json(&str_arg(config_json, "config_json")?)?;
        if !out_dir.is_null() {
            cfg.output = Some(path_arg(out_dir, "out_dir")?);
        }
        let outcome = pipeline::run(&cfg).map_err(|e| Failure(status_of(e.class()), e.to_string()))?;
        if let Some(out) = out.as_mut() {
            *out = summary(outcome.aligned.as_ref().unwrap_or(&outcome.base));
        }
        Ok(())
    })
}
