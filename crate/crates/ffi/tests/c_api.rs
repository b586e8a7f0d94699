// SPDX-License-Identifier: Apache-2.0

//! The exported functions called from Rust exactly as a C caller would.

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use scopy::ingest::{CommitSource, FixtureSource};
use scopy::model::{init_params, Checkpoint, ModelConfig};
use scopy_ffi::*;
use serde_json::Value;

fn listing_json() -> CString {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/commits");
    let b = FixtureSource::new(root)
        .fetch_commit("cvandeplas", "pystemon", "dbeb87afefdb63de2f4cff69b6f10c5965d14b54")
        .unwrap();
    CString::new(serde_json::to_string(&b).unwrap()).unwrap()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Takes ownership of a library string and parses it.
unsafe fn take_json(p: *mut c_char) -> Value {
    assert!(!p.is_null());
    let v = serde_json::from_str(CStr::from_ptr(p).to_str().unwrap()).unwrap();
    scopy_string_free(p);
    v
}

fn last_error() -> String {
    let p = scopy_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

// The directory is kept alive for as long as the handle.
struct OpenStore(*mut ScopyStore, #[allow(dead_code)] tempfile::TempDir);

impl Drop for OpenStore {
    fn drop(&mut self) {
        unsafe { scopy_store_free(self.0) };
    }
}

fn open_store() -> OpenStore {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().to_str().unwrap());
    let mut store = ptr::null_mut();
    assert_eq!(unsafe { scopy_store_open(path.as_ptr(), &mut store) }, ScopyStatus::Ok);
    assert!(scopy_last_error().is_null());
    OpenStore(store, dir)
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(scopy_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn ingest_vote_and_settle() {
    let s = open_store();
    let bundle = listing_json();
    let mut created = false;
    unsafe {
        assert_eq!(scopy_store_ingest(s.0, bundle.as_ptr(), c("base").as_ptr(), &mut created), ScopyStatus::Ok);
        assert!(created);
        assert_eq!(scopy_store_ingest(s.0, bundle.as_ptr(), ptr::null(), &mut created), ScopyStatus::Ok);
        assert!(!created);
        let mut len = 0usize;
        assert_eq!(scopy_store_len(s.0, &mut len), ScopyStatus::Ok);
        assert_eq!(len, 1);

        let mut out = ptr::null_mut();
        assert_eq!(scopy_store_candidates(s.0, c("pending").as_ptr(), c("cve").as_ptr(), &mut out), ScopyStatus::Ok);
        let list = take_json(out);
        let id = list[0]["commit_id"].as_str().unwrap().to_string();
        assert_eq!(list[0]["pattern"]["category"], "ApiUsage");
        let cid = c(&id);

        for (i, annotator) in ["annotator1", "annotator2", "annotator3"].iter().enumerate() {
            assert_eq!(
                scopy_store_vote(s.0, cid.as_ptr(), c(annotator).as_ptr(), c("security").as_ptr(), &mut out),
                ScopyStatus::Ok
            );
            let rec = take_json(out);
            assert_eq!(rec["votes"].as_array().unwrap().len(), i + 1);
        }
        assert_eq!(scopy_store_consensus(s.0, cid.as_ptr(), &mut out), ScopyStatus::Ok);
        assert_eq!(take_json(out), serde_json::json!({"status": "decided", "consensus": "security"}));

        let status = scopy_store_vote(s.0, cid.as_ptr(), c("annotator1").as_ptr(), c("non_security").as_ptr(), &mut out);
        assert_eq!(status, ScopyStatus::Conflict);
        assert!(last_error().contains("conflicting write"), "{}", last_error());

        assert_eq!(scopy_store_stats(s.0, 5, &mut out), ScopyStatus::Ok);
        let stats = take_json(out);
        assert_eq!(stats["repos"][0]["key"], "cvandeplas/pystemon");

        assert_eq!(scopy_store_record(s.0, cid.as_ptr(), &mut out), ScopyStatus::Ok);
        assert_eq!(take_json(out)["consensus"], "security");
    }
}

#[test]
fn error_codes() {
    let s = open_store();
    let mut out: *mut c_char = ptr::null_mut();
    unsafe {
        assert_eq!(scopy_store_record(s.0, c("nope@1").as_ptr(), &mut out), ScopyStatus::NotFound);
        assert!(out.is_null());
        assert_eq!(scopy_store_record(ptr::null(), c("x").as_ptr(), &mut out), ScopyStatus::NullArgument);
        assert_eq!(last_error(), "store is NULL");
        assert_eq!(scopy_store_record(s.0, c("x").as_ptr(), ptr::null_mut()), ScopyStatus::NullArgument);
        assert_eq!(scopy_store_candidates(s.0, c("bogus").as_ptr(), ptr::null(), &mut out), ScopyStatus::InvalidInput);
        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(scopy_match_keywords(bad_utf8.as_ptr().cast(), &mut out), ScopyStatus::InvalidUtf8);
        let mut created = false;
        assert_eq!(scopy_store_ingest(s.0, c("{\"repo_id\":").as_ptr(), ptr::null(), &mut created), ScopyStatus::InvalidInput);
        assert!(last_error().starts_with("commit bundle"));
        assert_eq!(scopy_store_ingest(s.0, listing_json().as_ptr(), c("mystery").as_ptr(), &mut created), ScopyStatus::InvalidInput);

        let id = c("cvandeplas__pystemon@dbeb87afefdb63de2f4cff69b6f10c5965d14b54");
        scopy_store_ingest(s.0, listing_json().as_ptr(), ptr::null(), &mut created);
        let status = scopy_store_vote(s.0, id.as_ptr(), c("mallory").as_ptr(), c("security").as_ptr(), &mut out);
        assert_eq!(status, ScopyStatus::InvalidInput);
        let status = scopy_store_vote(s.0, id.as_ptr(), c("annotator1").as_ptr(), c("maybe").as_ptr(), &mut out);
        assert_eq!(status, ScopyStatus::InvalidInput);

        // A success clears the previous message.
        assert_eq!(scopy_match_keywords(c("fix").as_ptr(), &mut out), ScopyStatus::Ok);
        scopy_string_free(out);
        assert!(scopy_last_error().is_null());
        scopy_store_free(ptr::null_mut());
        scopy_model_free(ptr::null_mut());
        scopy_string_free(ptr::null_mut());
    }
}

#[test]
fn analysis_entry_points() {
    let bundle = listing_json();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(scopy_commit_graph(bundle.as_ptr(), &mut out), ScopyStatus::Ok);
        let doc = take_json(out);
        assert_eq!(doc["nodes"].as_array().unwrap().len(), 6);
        assert_eq!(doc["units"][0]["unit"], "_load_yamlconfig");

        assert_eq!(scopy_match_keywords(c("Prevent denial of service via DoS").as_ptr(), &mut out), ScopyStatus::Ok);
        assert_eq!(take_json(out), serde_json::json!(["dos", "denial of service"]));

        assert_eq!(scopy_tag_pattern(bundle.as_ptr(), &mut out), ScopyStatus::Ok);
        assert_eq!(take_json(out)["category"], "ApiUsage");
    }
}

#[test]
fn model_scores_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let cfg = ModelConfig::default();
    Checkpoint::new(&cfg, &init_params(&cfg, 3).unwrap(), &[]).save(&path).unwrap();
    let cpath = c(path.to_str().unwrap());
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(scopy_model_load(cpath.as_ptr(), 0, &mut model), ScopyStatus::Ok);
        let (mut p, mut security) = (f64::NAN, false);
        assert_eq!(scopy_model_score(model, listing_json().as_ptr(), &mut p, &mut security), ScopyStatus::Ok);
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(security, p >= cfg.threshold);
        let (mut q, mut again) = (f64::NAN, false);
        scopy_model_score(model, listing_json().as_ptr(), &mut q, &mut again);
        assert_eq!(p, q);
        scopy_model_free(model);

        let missing = c(dir.path().join("absent.json").to_str().unwrap());
        let mut none = ptr::null_mut();
        assert_eq!(scopy_model_load(missing.as_ptr(), 0, &mut none), ScopyStatus::Io);
        assert!(none.is_null());
        std::fs::write(&path, "{}").unwrap();
        assert_eq!(scopy_model_load(cpath.as_ptr(), 0, &mut none), ScopyStatus::InvalidInput);
    }
}
