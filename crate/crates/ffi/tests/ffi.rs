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

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ctxalign::synth::{files, generate, SynthConfig};
use ctxalign_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn cpath(dir: &Path, name: &str) -> CString {
    c(dir.join(name).to_str().unwrap())
}

fn last_error() -> String {
    let p = ctx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn small_bundle(dir: &Path) {
    let cfg = SynthConfig {
        vocab_size: 60,
        corpus_size: 150,
        dim: 8,
        seed: 3,
        ..SynthConfig::default()
    };
    generate(&cfg).unwrap().write(dir).unwrap();
}

#[test]
fn rotation_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    small_bundle(dir.path());
    unsafe {
        let (mut src, mut tgt, mut corpus) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(ctx_embeddings_load(cpath(dir.path(), files::SRC_EMB).as_ptr(), &mut src), CtxStatus::Ok);
        assert_eq!(ctx_embeddings_load(cpath(dir.path(), files::TGT_EMB).as_ptr(), &mut tgt), CtxStatus::Ok);
        let status = ctx_corpus_load(
            cpath(dir.path(), files::SRC_TEXT).as_ptr(),
            cpath(dir.path(), files::TGT_TEXT).as_ptr(),
            cpath(dir.path(), files::GOLD_PAIRS).as_ptr(),
            c("src").as_ptr(),
            c("tgt").as_ptr(),
            &mut corpus,
        );
        assert_eq!(status, CtxStatus::Ok);
        assert_eq!(ctx_corpus_len(corpus), 150);
        assert_eq!(ctx_embeddings_dim(src), 8);
        assert_eq!(ctx_embeddings_num_sentences(src), 150);
        assert!(ctx_corpus_num_pairs(corpus) > 0);

        let mut before = CtxRetrievalSummary::default();
        assert_eq!(ctx_evaluate(src, tgt, corpus, CTX_SIM_CSLS, 10, CTX_MODE_CONTEXTUAL, &mut before), CtxStatus::Ok);

        let mut w = ptr::null_mut();
        assert_eq!(ctx_rotation_fit(src, tgt, corpus, &mut w), CtxStatus::Ok);
        assert_eq!(ctx_rotation_dim(w), 8);
        let mut m = vec![0.0; 64];
        assert_eq!(ctx_rotation_matrix(w, m.as_mut_ptr()), CtxStatus::Ok);
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|r| m[r * 8 + i] * m[r * 8 + j]).sum();
                assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-9);
            }
        }

        let saved = cpath(dir.path(), "w.crot");
        assert_eq!(ctx_rotation_save(w, saved.as_ptr()), CtxStatus::Ok);
        let mut w2 = ptr::null_mut();
        assert_eq!(ctx_rotation_load(saved.as_ptr(), &mut w2), CtxStatus::Ok);

        let mut mapped = ptr::null_mut();
        assert_eq!(ctx_rotation_apply(w2, src, &mut mapped), CtxStatus::Ok);
        let mut after = CtxRetrievalSummary::default();
        assert_eq!(ctx_evaluate(mapped, tgt, corpus, CTX_SIM_CSLS, 10, CTX_MODE_CONTEXTUAL, &mut after), CtxStatus::Ok);
        assert!(after.mean_accuracy > 0.9, "{after:?}");
        assert!(after.mean_accuracy > before.mean_accuracy);
        assert_eq!(after.evaluated, before.evaluated);

        ctx_embeddings_free(mapped);
        ctx_rotation_free(w2);
        ctx_rotation_free(w);
        ctx_corpus_free(corpus);
        ctx_embeddings_free(tgt);
        ctx_embeddings_free(src);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut emb = ptr::null_mut();
        assert_eq!(ctx_embeddings_load(ptr::null(), &mut emb), CtxStatus::NullPointer);
        assert!(last_error().contains("path"));

        assert_eq!(ctx_embeddings_load(c("/definitely/missing.ctxe").as_ptr(), &mut emb), CtxStatus::DataError);
        assert!(last_error().contains("missing.ctxe"));
        assert!(emb.is_null());

        let q = [1.0, 0.0];
        let (mut idx, mut score) = (0usize, 0.0);
        let status = ctx_retrieve(q.as_ptr(), 1, q.as_ptr(), 1, 2, 7, 1, &mut idx, &mut score);
        assert_eq!(status, CtxStatus::InvalidArgument);
        assert!(last_error().contains("similarity"));

        // Freeing NULL is a no-op and size queries on NULL return 0.
        ctx_embeddings_free(ptr::null_mut());
        ctx_rotation_free(ptr::null_mut());
        assert_eq!(ctx_embeddings_dim(ptr::null()), 0);
        assert_eq!(ctx_corpus_len(ptr::null()), 0);
    }
}

#[test]
fn buffers_and_raw_retrieval() {
    unsafe {
        let data = [1.0, 0.0, 0.0, 1.0, 0.6, 0.8];
        let lengths = [1usize, 2];
        let mut emb = ptr::null_mut();
        assert_eq!(ctx_embeddings_from_buffer(data.as_ptr(), 2, lengths.as_ptr(), 2, &mut emb), CtxStatus::Ok);
        assert_eq!(ctx_embeddings_total_tokens(emb), 3);
        let mut v = [0.0; 2];
        assert_eq!(ctx_embeddings_vector(emb, 1, 1, v.as_mut_ptr()), CtxStatus::Ok);
        assert_eq!(v, [0.6, 0.8]);
        assert_eq!(ctx_embeddings_vector(emb, 1, 2, v.as_mut_ptr()), CtxStatus::InvalidArgument);
        ctx_embeddings_free(emb);

        let queries = [0.0, 2.0, 3.0, 0.1];
        let candidates = [1.0, 0.0, 0.0, 1.0];
        let mut idx = [9usize; 2];
        let mut score = [0.0; 2];
        let status = ctx_retrieve(
            queries.as_ptr(),
            2,
            candidates.as_ptr(),
            2,
            2,
            CTX_SIM_COSINE,
            1,
            idx.as_mut_ptr(),
            score.as_mut_ptr(),
        );
        assert_eq!(status, CtxStatus::Ok);
        assert_eq!(idx, [1, 0]);
        assert!((score[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pipeline_runs_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = c(r#"{
        "data": {"synth": {"vocab_size": 60, "corpus_size": 150, "dim": 8}},
        "pairs": {"source": "gold"},
        "split": {"test": 50, "dev": 0, "train": 100},
        "align": {"method": "rotation"},
        "eval": {"filter": false},
        "analysis": {"projection_pairs": 0},
        "seed": 1
    }"#);
    let out_dir = c(dir.path().to_str().unwrap());
    let mut summary = CtxRetrievalSummary::default();
    unsafe {
        assert_eq!(ctx_run_pipeline(config.as_ptr(), out_dir.as_ptr(), &mut summary), CtxStatus::Ok);
        assert!(summary.mean_accuracy > 0.9, "{summary:?}");
        assert!(dir.path().join("manifest.json").exists());

        let bad = c(r#"{"data": {"synth": {"dim": 0}}}"#);
        assert_ne!(ctx_run_pipeline(bad.as_ptr(), out_dir.as_ptr(), ptr::null_mut()), CtxStatus::Ok);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ctx_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ctxalign.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    // The header must also be valid C when a compiler is around.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg("-include")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ctxalign.h"))
        .stdin(std::process::Stdio::null())
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
