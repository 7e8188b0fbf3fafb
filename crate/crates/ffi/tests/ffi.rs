use std::ffi::{CStr, CString};
use std::ptr;

use dialect_refine::classifier::{save_model, train, Classify, FeaturizerConfig, Model, TrainMeta};
use dialect_refine::corpus::normalized_levenshtein;
use dialect_refine::metrics::{bleu, chrf_pp, BleuConfig};
use dialect_refine::retrieval::{Bm25Index, Bm25Params};
use dialect_refine::synthlang::{default_specs, generate_labeled_corpus};
use dialect_refine_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dr_last_error()) }.to_str().unwrap().to_owned()
}

fn small_model() -> (tempfile::TempDir, std::path::PathBuf, Model) {
    let data = generate_labeled_corpus(&default_specs(), 60, 3).unwrap();
    let f = FeaturizerConfig { ngram_min: 1, ngram_max: 3, hash_dim: 1 << 12, use_word_unigrams: false };
    let model = Model::Base(train(&data, &f, &TrainMeta::default()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&path, &model).unwrap();
    (dir, path, model)
}

#[test]
fn classifier_matches_the_library() {
    let (_dir, path, model) = small_model();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dr_classifier_load(c(path.to_str().unwrap()).as_ptr(), &mut h) }, DrStatus::Ok);
    let n = unsafe { dr_classifier_num_labels(h) };
    assert_eq!(n, model.labels().len());
    for (i, l) in model.labels().iter().enumerate() {
        assert_eq!(unsafe { CStr::from_ptr(dr_classifier_label(h, i)) }.to_str().unwrap(), l.as_str());
    }
    assert!(unsafe { dr_classifier_label(h, n) }.is_null());

    let text = "botzumeh kuyzuseh gzeh sira";
    let mut post = vec![0.0; n];
    let mut label = usize::MAX;
    assert_eq!(unsafe { dr_classifier_predict(h, c(text).as_ptr(), post.as_mut_ptr(), n, &mut label) }, DrStatus::Ok);
    let expected = model.predict_proba(text);
    assert_eq!(post, expected.posterior);
    assert_eq!(model.labels()[label], expected.label);

    let mut short = vec![0.0; n - 1];
    let status = unsafe { dr_classifier_predict(h, c(text).as_ptr(), short.as_mut_ptr(), n - 1, ptr::null_mut()) };
    assert_eq!(status, DrStatus::BufferTooSmall);
    assert!(!last_error().is_empty());

    let mut dfs = f64::NAN;
    let status = unsafe {
        dr_classifier_dfs(h, c("a b").as_ptr(), c("a b").as_ptr(), c("c d").as_ptr(), DrEmbeddingMode::Logit, &mut dfs)
    };
    assert_eq!(status, DrStatus::Ok);
    assert!(dfs.is_finite());
    unsafe { dr_classifier_free(h) };
}

#[test]
fn load_errors_are_reported() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dr_classifier_load(c("/nonexistent/model.bin").as_ptr(), &mut h) }, DrStatus::Io);
    assert!(h.is_null());
    assert!(last_error().contains("nonexistent") || !last_error().is_empty());
    assert_eq!(unsafe { dr_classifier_load(ptr::null(), &mut h) }, DrStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { dr_classifier_load(bad.as_ptr().cast(), &mut h) }, DrStatus::InvalidUtf8);
    unsafe { dr_classifier_free(ptr::null_mut()) };
    assert_eq!(unsafe { dr_classifier_num_labels(ptr::null()) }, 0);
}

#[test]
fn metrics_match_the_library() {
    let (h, r) = ("a b c d e", "a b c x e");
    let mut v = 0.0;
    assert_eq!(unsafe { dr_bleu(c(h).as_ptr(), c(r).as_ptr(), &mut v) }, DrStatus::Ok);
    assert_eq!(v, bleu(&[h], &[r], &BleuConfig::default()).unwrap());
    assert_eq!(unsafe { dr_chrf_pp(c(h).as_ptr(), c(r).as_ptr(), &mut v) }, DrStatus::Ok);
    assert_eq!(v, chrf_pp(&[h], &[r]).unwrap());
    assert_eq!(unsafe { dr_normalized_levenshtein(c("kitten").as_ptr(), c("sitting").as_ptr(), &mut v) }, DrStatus::Ok);
    assert_eq!(v, normalized_levenshtein("kitten", "sitting"));

    let (eh, er, es) = ([1.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
    assert_eq!(unsafe { dr_dfs(eh.as_ptr(), er.as_ptr(), es.as_ptr(), 2, 1e-6, &mut v) }, DrStatus::Ok);
    assert!((v - ((2.0f64 + 1e-6) / (1.0 + 1e-6)).ln()).abs() < 1e-12);
    let zero = [0.0, 0.0];
    assert_eq!(unsafe { dr_dfs(zero.as_ptr(), er.as_ptr(), es.as_ptr(), 2, 1e-6, &mut v) }, DrStatus::Metric);
}

#[test]
fn bm25_matches_the_library() {
    let pool: Vec<_> = generate_labeled_corpus(&default_specs(), 30, 5)
        .unwrap()
        .into_iter()
        .filter(|r| r.label.as_str() == "Jeju")
        .collect();
    let index = Bm25Index::build(&pool, Bm25Params::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("jeju.json");
    index.save(&path).unwrap();

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dr_bm25_load(c(path.to_str().unwrap()).as_ptr(), &mut h) }, DrStatus::Ok);
    assert_eq!(unsafe { dr_bm25_len(h) }, pool.len());
    let query = pool[3].standard.clone();
    let (mut docs, mut scores, mut count) = (vec![0usize; 5], vec![0.0; 5], 0usize);
    let status = unsafe { dr_bm25_top_k(h, c(&query).as_ptr(), 5, docs.as_mut_ptr(), scores.as_mut_ptr(), &mut count) };
    assert_eq!(status, DrStatus::Ok);
    let expected = index.top_k(&query, 5);
    assert_eq!(count, expected.len());
    for i in 0..count {
        let id = unsafe { CStr::from_ptr(dr_bm25_doc_id(h, docs[i])) }.to_str().unwrap();
        assert_eq!(id, expected[i].record.id);
        assert_eq!(scores[i], expected[i].score);
    }
    let status = unsafe { dr_bm25_top_k(h, c("x").as_ptr(), 0, docs.as_mut_ptr(), scores.as_mut_ptr(), &mut count) };
    assert_eq!(status, DrStatus::InvalidArgument);
    unsafe { dr_bm25_free(h) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dialect_refine.h")).unwrap();
    for name in [
        "dr_classifier_load",
        "dr_classifier_predict",
        "dr_classifier_free",
        "dr_dfs",
        "dr_chrf_pp",
        "dr_bleu",
        "dr_normalized_levenshtein",
        "dr_bm25_top_k",
        "dr_last_error",
        "DR_STATUS_OK",
        "typedef struct DrClassifier DrClassifier",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    assert_eq!(unsafe { CStr::from_ptr(dr_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dialect_refine.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).status() {
        Ok(status) => assert!(status.success(), "cc rejected the header"),
        Err(_) => eprintln!("no C compiler; skipping header compile check"),
    }
}
