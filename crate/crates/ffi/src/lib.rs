// SPDX-License-Identifier: Apache-2.0

//! C interface to the scopy library.
//!
//! Every entry point returns a [`ScopyStatus`]. When the status is not
//! `SCOPY_STATUS_OK`, [`scopy_last_error`] returns a message describing the
//! failure; the message belongs to the calling thread and stays valid until
//! that thread's next call into the library.
//!
//! Input strings are NUL-terminated UTF-8. Output strings (JSON documents)
//! are allocated by the library and must be released with
//! [`scopy_string_free`]. Handles are released with their `_free` function;
//! passing NULL to a `_free` function is a no-op.
//!
//! A store handle may be shared between threads. A model handle is
//! read-only after loading and may also be shared.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde::Serialize;

use scopy::commitcpg::{build_commit_cpg, CommitCpgError, SliceOptions};
use scopy::embed::{embed_graph, HashEmbedder};
use scopy::ingest::{CommitBundle, SourceFilter};
use scopy::keywords::{match_keywords, KeywordSet};
use scopy::model::{label_for, predict, Checkpoint, ModelConfig, ModelParams, PredictedLabel};
use scopy::patterns::{tag, SecureApiTable};
use scopy::store::{CandidateFilter, LabelRecord, Origin, Store, StoreConfig, StoreError};

/// Result of every library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopyStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed JSON, an unknown enum value, an unregistered annotator or
    /// a commit that cannot be analysed.
    InvalidInput = 3,
    NotFound = 4,
    /// The write contradicts stored state, e.g. a vote on a commit whose
    /// consensus is final.
    Conflict = 5,
    /// File system failure or corrupt store files.
    Io = 6,
    /// The library panicked; the handle involved should be discarded.
    Panic = 7,
}

/// Open triage store.
pub struct ScopyStore {
    store: Store,
    keywords: KeywordSet,
    api_table: SecureApiTable,
}

/// Trained classifier loaded from a checkpoint.
pub struct ScopyModel {
    config: ModelConfig,
    params: ModelParams,
    embedder: HashEmbedder,
}

struct Failure {
    status: ScopyStatus,
    message: String,
}

impl Failure {
    fn new(status: ScopyStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Failure::new(ScopyStatus::InvalidInput, message.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => ScopyStatus::NotFound,
            StoreError::UnknownAnnotator(_) | StoreError::InvalidRecord(_) => ScopyStatus::InvalidInput,
            StoreError::ConflictingWrite { .. } => ScopyStatus::Conflict,
            StoreError::Corrupt { .. } | StoreError::Io { .. } => ScopyStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<CommitCpgError> for Failure {
    fn from(e: CommitCpgError) -> Self {
        Failure::new(ScopyStatus::InvalidInput, format!("{}: {e}", e.code()))
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', "\\0")).expect("NULs were escaped");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> ScopyStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScopyStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_last_error(&format!("internal error: {msg}"));
            ScopyStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::new(ScopyStatus::NullArgument, format!("{name} is NULL"))
}

unsafe fn input_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(ScopyStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn optional_str<'a>(p: *const c_char, name: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        input_str(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

fn check_out<T>(p: *mut T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(null(name))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("serialized JSON has no NUL bytes").into_raw()
}

unsafe fn write_json<T: Serialize>(out: *mut *mut c_char, value: &T) -> FfiResult<()> {
    let text = serde_json::to_string(value).map_err(|e| Failure::new(ScopyStatus::Panic, e.to_string()))?;
    *out = to_c_string(text);
    Ok(())
}

fn parse_bundle(json: &str) -> FfiResult<CommitBundle> {
    let bundle: CommitBundle = serde_json::from_str(json).map_err(|e| Failure::input(format!("commit bundle: {e}")))?;
    bundle.validate().map_err(|e| Failure::input(format!("commit bundle: {e}")))?;
    Ok(bundle)
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn scopy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL if the last
/// call succeeded. Do not free.
#[no_mangle]
pub extern "C" fn scopy_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn scopy_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opens (creating if needed) the store in directory `dir` with the default
/// annotator roster.
///
/// # Safety
/// `dir` must be a valid C string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_open(dir: *const c_char, out: *mut *mut ScopyStore) -> ScopyStatus {
    guard(|| {
        check_out(out, "out")?;
        let dir = input_str(dir, "dir")?;
        let store = Store::open(Path::new(dir), &StoreConfig::default())?;
        *out = Box::into_raw(Box::new(ScopyStore {
            store,
            keywords: KeywordSet::default(),
            api_table: SecureApiTable::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `store` must be NULL or a handle from [`scopy_store_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_free(store: *mut ScopyStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of candidate records.
///
/// # Safety
/// `store` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_len(store: *const ScopyStore, out_len: *mut usize) -> ScopyStatus {
    guard(|| {
        check_out(out_len, "out_len")?;
        *out_len = handle(store, "store")?.store.len();
        Ok(())
    })
}

/// Adds a commit bundle (JSON) as a candidate. `origin` is `"base"`,
/// `"pilot"` or `"augmented"`; NULL means pilot. The record gets the
/// matched security keywords and a fix-pattern tag. `*out_created` is false
/// when the commit was already present.
///
/// # Safety
/// Pointers must be valid as described; `origin` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_ingest(
    store: *const ScopyStore,
    bundle_json: *const c_char,
    origin: *const c_char,
    out_created: *mut bool,
) -> ScopyStatus {
    guard(|| {
        check_out(out_created, "out_created")?;
        let s = handle(store, "store")?;
        let bundle = parse_bundle(input_str(bundle_json, "bundle_json")?)?;
        let origin: Origin = match optional_str(origin, "origin")? {
            Some(o) => o.parse()?,
            None => Origin::Pilot,
        };
        let mut record = LabelRecord::new(bundle.commit_id(), origin);
        record.matched_keywords = match_keywords(&bundle.message, &s.keywords);
        record.pattern = Some(tag(&bundle, &s.api_table));
        *out_created = s.store.insert_candidate(record, Some(bundle))?;
        Ok(())
    })
}

/// Candidate records as a JSON array. `status` (`pending`, `voted`,
/// `consensus`) and `source` (`cve`, `keyword`, `model`) filter the list
/// when non-NULL.
///
/// # Safety
/// Pointers must be valid as described; `status` and `source` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_candidates(
    store: *const ScopyStore,
    status: *const c_char,
    source: *const c_char,
    out_json: *mut *mut c_char,
) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let s = handle(store, "store")?;
        let filter = CandidateFilter {
            status: optional_str(status, "status")?.map(str::parse).transpose()?,
            source: optional_str(source, "source")?.map(str::parse).transpose()?,
            origin: None,
        };
        write_json(out_json, &s.store.list_candidates(&filter))
    })
}

/// One record as JSON.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_record(store: *const ScopyStore, commit_id: *const c_char, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let record = handle(store, "store")?.store.get_record(input_str(commit_id, "commit_id")?)?;
        write_json(out_json, &record)
    })
}

/// Appends a vote (`security`, `non_security` or `unsure`) and finalizes
/// the consensus once the votes decide it. Writes the updated record.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_vote(
    store: *const ScopyStore,
    commit_id: *const c_char,
    annotator: *const c_char,
    label: *const c_char,
    out_json: *mut *mut c_char,
) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let s = handle(store, "store")?;
        let label = input_str(label, "label")?.parse()?;
        let record = s.store.vote_and_settle(input_str(commit_id, "commit_id")?, input_str(annotator, "annotator")?, label)?;
        write_json(out_json, &record)
    })
}

/// Consensus state as JSON, e.g. `{"status":"decided","consensus":"security"}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_consensus(store: *const ScopyStore, commit_id: *const c_char, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let outcome = handle(store, "store")?.store.consensus(input_str(commit_id, "commit_id")?)?;
        write_json(out_json, &outcome)
    })
}

/// Dataset statistics as JSON, listing at most `top_repos` repositories.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_store_stats(store: *const ScopyStore, top_repos: usize, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        write_json(out_json, &handle(store, "store")?.store.stats(top_repos))
    })
}

/// Sliced commit graph of a bundle, as the JSON graph document.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_commit_graph(bundle_json: *const c_char, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let bundle = parse_bundle(input_str(bundle_json, "bundle_json")?)?;
        let graph = build_commit_cpg(&bundle, &SourceFilter::default(), &SliceOptions::default())?;
        write_json(out_json, &graph.to_document())
    })
}

/// Default security keywords found in a commit message, as a JSON array.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_match_keywords(message: *const c_char, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let found = match_keywords(input_str(message, "message")?, &KeywordSet::default());
        write_json(out_json, &found)
    })
}

/// Fix-pattern label of a bundle, as JSON `{"category":..,"evidence":[..]}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_tag_pattern(bundle_json: *const c_char, out_json: *mut *mut c_char) -> ScopyStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let bundle = parse_bundle(input_str(bundle_json, "bundle_json")?)?;
        write_json(out_json, &tag(&bundle, &SecureApiTable::default()))
    })
}

/// Loads a model checkpoint. Node features use the hashing embedder with
/// the checkpoint's input width and the given seed.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scopy_model_load(path: *const c_char, embed_seed: u64, out: *mut *mut ScopyModel) -> ScopyStatus {
    guard(|| {
        check_out(out, "out")?;
        let path = input_str(path, "path")?;
        let (config, params) = Checkpoint::load(Path::new(path))
            .and_then(Checkpoint::into_model)
            .map_err(|e| Failure::new(if e.code() == "Io" { ScopyStatus::Io } else { ScopyStatus::InvalidInput }, e.to_string()))?;
        let embedder = HashEmbedder::new(config.embed_dim, embed_seed);
        *out = Box::into_raw(Box::new(ScopyModel { config, params, embedder }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`scopy_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scopy_model_free(model: *mut ScopyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Security probability of a commit bundle and whether it reaches the
/// checkpoint's threshold.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scopy_model_score(
    model: *const ScopyModel,
    bundle_json: *const c_char,
    out_probability: *mut f64,
    out_security: *mut bool,
) -> ScopyStatus {
    guard(|| {
        check_out(out_probability, "out_probability")?;
        check_out(out_security, "out_security")?;
        let m = handle(model, "model")?;
        let bundle = parse_bundle(input_str(bundle_json, "bundle_json")?)?;
        let graph = build_commit_cpg(&bundle, &SourceFilter::default(), &SliceOptions::default())?;
        let embedded = embed_graph(&graph.graph, &m.embedder, &bundle.commit_id(), None).map_err(Failure::input)?;
        let p = predict(&m.params, &embedded, &m.config).map_err(Failure::input)?;
        *out_probability = p;
        *out_security = label_for(p, m.config.threshold) == PredictedLabel::Security;
        Ok(())
    })
}
