// SPDX-License-Identifier: Apache-2.0

//! Candidate commits, annotator votes and consensus labels, persisted as
//! line-delimited JSON tables in one directory:
//!
//! * `annotators.json`: registered annotator ids
//! * `commits.jsonl`: record metadata and the commit bundle; the last
//!   line for a commit id wins
//! * `votes.jsonl`: the append-only vote log
//! * `consensus.jsonl`: finalized consensus labels
//!
//! All mutations go through one lock, so a store is safe to share across
//! threads; reads proceed concurrently.

pub mod http;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CommitBundle;
use crate::patterns::PatternLabel;

pub use stats::{efficiency_ratio, CompositionRow, CountRow, DatasetStats, EfficiencyRow, PatternRow};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no record for {0}")]
    NotFound(String),
    #[error("annotator {0:?} is not registered")]
    UnknownAnnotator(String),
    #[error("conflicting write to {commit_id}: {reason}")]
    ConflictingWrite { commit_id: String, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "NotFound",
            StoreError::UnknownAnnotator(_) => "UnknownAnnotator",
            StoreError::ConflictingWrite { .. } => "ConflictingWrite",
            StoreError::InvalidRecord(_) => "InvalidRecord",
            StoreError::Corrupt { .. } => "Corrupt",
            StoreError::Io { .. } => "Io",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn conflict(commit_id: &str, reason: impl Into<String>) -> Self {
        StoreError::ConflictingWrite {
            commit_id: commit_id.to_string(),
            reason: reason.into(),
        }
    }
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = StoreError;

            fn from_str(s: &str) -> Result<Self, StoreError> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(StoreError::InvalidRecord(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

/// Which collection path produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Linked from a vulnerability report.
    Base,
    /// Passed the keyword filter.
    Pilot,
    /// Scored positive by the classifier.
    Augmented,
}

string_enum!(Origin { Base => "base", Pilot => "pilot", Augmented => "augmented" });

/// Candidate source, one per origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Cve,
    Keyword,
    Model,
}

string_enum!(CandidateSource { Cve => "cve", Keyword => "keyword", Model => "model" });

impl Origin {
    pub fn source(self) -> CandidateSource {
        match self {
            Origin::Base => CandidateSource::Cve,
            Origin::Pilot => CandidateSource::Keyword,
            Origin::Augmented => CandidateSource::Model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteLabel {
    Security,
    NonSecurity,
    Unsure,
}

string_enum!(VoteLabel { Security => "security", NonSecurity => "non_security", Unsure => "unsure" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consensus {
    Security,
    NonSecurity,
}

/// Review state used to filter the candidate queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// No votes yet.
    Pending,
    /// Votes cast, no finalized consensus.
    Voted,
    Consensus,
}

string_enum!(Status { Pending => "pending", Voted => "voted", Consensus => "consensus" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub annotator: String,
    pub label: VoteLabel,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub commit_id: String,
    pub origin: Origin,
    #[serde(default)]
    pub votes: Vec<Vote>,
    #[serde(default)]
    pub consensus: Option<Consensus>,
    #[serde(default)]
    pub model_score: Option<f64>,
    #[serde(default)]
    pub matched_keywords: Vec<String>,
    #[serde(default)]
    pub pattern: Option<PatternLabel>,
    #[serde(default)]
    pub cwe: Option<String>,
}

impl LabelRecord {
    pub fn new(commit_id: impl Into<String>, origin: Origin) -> Self {
        LabelRecord {
            commit_id: commit_id.into(),
            origin,
            votes: Vec::new(),
            consensus: None,
            model_score: None,
            matched_keywords: Vec::new(),
            pattern: None,
            cwe: None,
        }
    }

    pub fn status(&self) -> Status {
        match (&self.consensus, self.votes.is_empty()) {
            (Some(_), _) => Status::Consensus,
            (None, true) => Status::Pending,
            (None, false) => Status::Voted,
        }
    }

    pub fn source(&self) -> CandidateSource {
        self.origin.source()
    }

    /// `owner/repo` part of the commit id.
    pub fn repo(&self) -> String {
        let repo = self.commit_id.split('@').next().unwrap_or_default();
        repo.replacen("__", "/", 1)
    }

    /// Each annotator's latest vote.
    pub fn final_votes(&self) -> BTreeMap<&str, VoteLabel> {
        self.votes.iter().map(|v| (v.annotator.as_str(), v.label)).collect()
    }
}

/// Where a record stands with respect to the consensus rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "consensus", rename_all = "snake_case")]
pub enum ConsensusOutcome {
    /// Some registered annotator has not voted.
    AwaitingVotes,
    /// Everyone voted but the final votes are mixed or include `unsure`.
    PendingAdjudication,
    Decided(Consensus),
}

/// Security needs every registered annotator's final vote to be
/// security; non-security needs every final vote to be non-security.
/// Anything else waits for more votes or adjudication.
pub fn decide(annotators: &[String], record: &LabelRecord) -> ConsensusOutcome {
    let finals = record.final_votes();
    let mut labels = Vec::with_capacity(annotators.len());
    for a in annotators {
        match finals.get(a.as_str()) {
            Some(l) => labels.push(*l),
            None => return ConsensusOutcome::AwaitingVotes,
        }
    }
    if labels.is_empty() {
        ConsensusOutcome::AwaitingVotes
    } else if labels.iter().all(|l| *l == VoteLabel::Security) {
        ConsensusOutcome::Decided(Consensus::Security)
    } else if labels.iter().all(|l| *l == VoteLabel::NonSecurity) {
        ConsensusOutcome::Decided(Consensus::NonSecurity)
    } else {
        ConsensusOutcome::PendingAdjudication
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateFilter {
    pub status: Option<Status>,
    pub origin: Option<Origin>,
    pub source: Option<CandidateSource>,
}

impl CandidateFilter {
    pub fn matches(&self, r: &LabelRecord) -> bool {
        self.status.is_none_or(|s| r.status() == s)
            && self.origin.is_none_or(|o| r.origin == o)
            && self.source.is_none_or(|s| r.source() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub annotators: Vec<String>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            annotators: (1..=3).map(|i| format!("annotator{i}")).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CommitRow {
    #[serde(flatten)]
    meta: LabelRecord,
    #[serde(default)]
    bundle: Option<CommitBundle>,
}

#[derive(Serialize, Deserialize)]
struct VoteRow {
    commit_id: String,
    #[serde(flatten)]
    vote: Vote,
}

#[derive(Serialize, Deserialize)]
struct ConsensusRow {
    commit_id: String,
    consensus: Consensus,
    timestamp: u64,
}

/// One line of an export file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ExportLine {
    Annotators { annotators: Vec<String> },
    Record { record: LabelRecord, bundle: Option<CommitBundle> },
}

#[derive(Debug, Default)]
struct State {
    annotators: Vec<String>,
    records: BTreeMap<String, LabelRecord>,
    bundles: BTreeMap<String, CommitBundle>,
    vote_log_len: usize,
}

pub struct Store {
    dir: PathBuf,
    state: RwLock<State>,
}

const ANNOTATORS: &str = "annotators.json";
const COMMITS: &str = "commits.jsonl";
const VOTES: &str = "votes.jsonl";
const CONSENSUS: &str = "consensus.jsonl";

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn to_line<T: Serialize>(row: &T) -> String {
    let mut s = serde_json::to_string(row).expect("store rows serialize");
    s.push('\n');
    s
}

impl Store {
    /// Opens the store in `dir`, creating it with `config` when it has no
    /// annotator file yet. An existing store keeps its own annotators.
    pub fn open(dir: impl Into<PathBuf>, config: &StoreConfig) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let ann_path = dir.join(ANNOTATORS);
        let annotators: Vec<String> = match fs::read_to_string(&ann_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: ann_path.clone(),
                line: 1,
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                validate_annotators(&config.annotators)?;
                write_atomic(&ann_path, &serde_json::to_string_pretty(&config.annotators).expect("strings serialize"))?;
                config.annotators.clone()
            }
            Err(e) => return Err(StoreError::io(&ann_path, e)),
        };
        let mut state = State {
            annotators,
            ..State::default()
        };
        for row in read_rows::<CommitRow>(&dir.join(COMMITS))? {
            let id = row.meta.commit_id.clone();
            let mut meta = row.meta;
            meta.votes.clear();
            meta.consensus = None;
            if let Some(b) = row.bundle {
                state.bundles.insert(id.clone(), b);
            }
            state.records.insert(id, meta);
        }
        for row in read_rows::<VoteRow>(&dir.join(VOTES))? {
            let rec = state.records.get_mut(&row.commit_id).ok_or_else(|| StoreError::Corrupt {
                path: dir.join(VOTES),
                line: state.vote_log_len + 1,
                message: format!("vote for unknown commit {}", row.commit_id),
            })?;
            rec.votes.push(row.vote);
            state.vote_log_len += 1;
        }
        for row in read_rows::<ConsensusRow>(&dir.join(CONSENSUS))? {
            if let Some(rec) = state.records.get_mut(&row.commit_id) {
                rec.consensus = Some(row.consensus);
            }
        }
        Ok(Store {
            dir,
            state: RwLock::new(state),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|p| p.into_inner())
    }

    fn append(&self, table: &str, text: &str) -> Result<(), StoreError> {
        let path = self.dir.join(table);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| StoreError::io(&path, e))?;
        f.flush().map_err(|e| StoreError::io(&path, e))
    }

    pub fn annotators(&self) -> Vec<String> {
        self.read().annotators.clone()
    }

    pub fn register_annotator(&self, id: &str) -> Result<bool, StoreError> {
        let mut st = self.write();
        if st.annotators.iter().any(|a| a == id) {
            return Ok(false);
        }
        let mut next = st.annotators.clone();
        next.push(id.to_string());
        validate_annotators(&next)?;
        write_atomic(&self.dir.join(ANNOTATORS), &serde_json::to_string_pretty(&next).expect("strings serialize"))?;
        st.annotators = next;
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vote_log_len(&self) -> usize {
        self.read().vote_log_len
    }

    pub fn contains(&self, commit_id: &str) -> bool {
        self.read().records.contains_key(commit_id)
    }

    /// Adds a new candidate. Returns `false`, and changes nothing, when the
    /// commit is already stored.
    pub fn insert_candidate(&self, record: LabelRecord, bundle: Option<CommitBundle>) -> Result<bool, StoreError> {
        if !record.votes.is_empty() || record.consensus.is_some() {
            return Err(StoreError::InvalidRecord("new candidates carry no votes".into()));
        }
        let mut st = self.write();
        if st.records.contains_key(&record.commit_id) {
            return Ok(false);
        }
        self.put_locked(&mut st, record, bundle)?;
        Ok(true)
    }

    /// Inserts or updates a record. Metadata is replaced. Votes may only be
    /// extended: the stored votes must be a prefix of `record.votes`. A
    /// consensus, once stored, cannot change.
    pub fn put_record(&self, record: LabelRecord, bundle: Option<CommitBundle>) -> Result<(), StoreError> {
        let mut st = self.write();
        self.put_locked(&mut st, record, bundle)
    }

    fn put_locked(&self, st: &mut State, record: LabelRecord, bundle: Option<CommitBundle>) -> Result<(), StoreError> {
        let id = record.commit_id.clone();
        if id.trim().is_empty() {
            return Err(StoreError::InvalidRecord("empty commit id".into()));
        }
        if record.model_score.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            return Err(StoreError::InvalidRecord(format!("model score outside [0, 1] for {id}")));
        }
        if let Some(v) = record.votes.iter().find(|v| !st.annotators.contains(&v.annotator)) {
            return Err(StoreError::UnknownAnnotator(v.annotator.clone()));
        }
        let (old_votes, old_consensus) = match st.records.get(&id) {
            Some(old) => (old.votes.clone(), old.consensus),
            None => (Vec::new(), None),
        };
        if !record.votes.starts_with(&old_votes) {
            return Err(StoreError::conflict(&id, "stored votes are not a prefix of the new votes"));
        }
        match (old_consensus, record.consensus) {
            (Some(a), Some(b)) if a != b => return Err(StoreError::conflict(&id, "consensus already finalized")),
            (Some(_), None) => return Err(StoreError::conflict(&id, "consensus already finalized")),
            (None, Some(c)) if decide(&st.annotators, &record) != ConsensusOutcome::Decided(c) => {
                return Err(StoreError::InvalidRecord(format!("consensus for {id} does not follow from its votes")));
            }
            _ => {}
        }
        let mut meta = record.clone();
        meta.votes.clear();
        meta.consensus = None;
        self.append(
            COMMITS,
            &to_line(&CommitRow {
                meta,
                bundle: bundle.clone(),
            }),
        )?;
        let new_votes = &record.votes[old_votes.len()..];
        if !new_votes.is_empty() {
            let text: String = new_votes
                .iter()
                .map(|v| {
                    to_line(&VoteRow {
                        commit_id: id.clone(),
                        vote: v.clone(),
                    })
                })
                .collect();
            self.append(VOTES, &text)?;
            st.vote_log_len += new_votes.len();
        }
        if let (None, Some(c)) = (old_consensus, record.consensus) {
            self.append(
                CONSENSUS,
                &to_line(&ConsensusRow {
                    commit_id: id.clone(),
                    consensus: c,
                    timestamp: now_ms(),
                }),
            )?;
        }
        if let Some(b) = bundle {
            st.bundles.insert(id.clone(), b);
        }
        st.records.insert(id, record);
        Ok(())
    }

    pub fn get_record(&self, commit_id: &str) -> Result<LabelRecord, StoreError> {
        self.read()
            .records
            .get(commit_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(commit_id.to_string()))
    }

    pub fn get_bundle(&self, commit_id: &str) -> Result<Option<CommitBundle>, StoreError> {
        let st = self.read();
        if !st.records.contains_key(commit_id) {
            return Err(StoreError::NotFound(commit_id.to_string()));
        }
        Ok(st.bundles.get(commit_id).cloned())
    }

    /// Records in commit-id order.
    pub fn list_candidates(&self, filter: &CandidateFilter) -> Vec<LabelRecord> {
        self.read().records.values().filter(|r| filter.matches(r)).cloned().collect()
    }

    pub fn records(&self) -> Vec<LabelRecord> {
        self.list_candidates(&CandidateFilter::default())
    }

    /// Appends a vote. A later vote by the same annotator supersedes the
    /// earlier one for consensus purposes; both stay in the log.
    pub fn record_vote(&self, commit_id: &str, annotator: &str, label: VoteLabel) -> Result<LabelRecord, StoreError> {
        let mut st = self.write();
        self.vote_locked(&mut st, commit_id, annotator, label)
    }

    fn vote_locked(&self, st: &mut State, commit_id: &str, annotator: &str, label: VoteLabel) -> Result<LabelRecord, StoreError> {
        if !st.annotators.iter().any(|a| a == annotator) {
            return Err(StoreError::UnknownAnnotator(annotator.to_string()));
        }
        let rec = st.records.get(commit_id).ok_or_else(|| StoreError::NotFound(commit_id.to_string()))?;
        if rec.consensus.is_some() {
            return Err(StoreError::conflict(commit_id, "consensus already finalized"));
        }
        let vote = Vote {
            annotator: annotator.to_string(),
            label,
            timestamp: now_ms(),
        };
        self.append(
            VOTES,
            &to_line(&VoteRow {
                commit_id: commit_id.to_string(),
                vote: vote.clone(),
            }),
        )?;
        st.vote_log_len += 1;
        let rec = st.records.get_mut(commit_id).expect("checked above");
        rec.votes.push(vote);
        Ok(rec.clone())
    }

    /// The consensus state of a record; a finalized consensus is reported
    /// as decided.
    pub fn consensus(&self, commit_id: &str) -> Result<ConsensusOutcome, StoreError> {
        let st = self.read();
        let rec = st.records.get(commit_id).ok_or_else(|| StoreError::NotFound(commit_id.to_string()))?;
        Ok(match rec.consensus {
            Some(c) => ConsensusOutcome::Decided(c),
            None => decide(&st.annotators, rec),
        })
    }

    /// Writes the consensus of a decided record. Fails with
    /// `ConflictingWrite` if it was already finalized, so of two racing
    /// callers exactly one succeeds.
    pub fn finalize(&self, commit_id: &str) -> Result<ConsensusOutcome, StoreError> {
        let mut st = self.write();
        self.finalize_locked(&mut st, commit_id)
    }

    fn finalize_locked(&self, st: &mut State, commit_id: &str) -> Result<ConsensusOutcome, StoreError> {
        let rec = st.records.get(commit_id).ok_or_else(|| StoreError::NotFound(commit_id.to_string()))?;
        if rec.consensus.is_some() {
            return Err(StoreError::conflict(commit_id, "consensus already finalized"));
        }
        let outcome = decide(&st.annotators, rec);
        if let ConsensusOutcome::Decided(c) = outcome {
            self.append(
                CONSENSUS,
                &to_line(&ConsensusRow {
                    commit_id: commit_id.to_string(),
                    consensus: c,
                    timestamp: now_ms(),
                }),
            )?;
            st.records.get_mut(commit_id).expect("checked above").consensus = Some(c);
        }
        Ok(outcome)
    }

    /// Records a vote and, if that settles the record, finalizes its
    /// consensus in the same critical section.
    pub fn vote_and_settle(&self, commit_id: &str, annotator: &str, label: VoteLabel) -> Result<LabelRecord, StoreError> {
        let mut st = self.write();
        self.vote_locked(&mut st, commit_id, annotator, label)?;
        self.finalize_locked(&mut st, commit_id)?;
        Ok(st.records[commit_id].clone())
    }

    /// Rewrites `commits.jsonl` with one line per commit.
    pub fn compact(&self) -> Result<(), StoreError> {
        let st = self.write();
        let text: String = st
            .records
            .values()
            .map(|r| {
                let mut meta = r.clone();
                meta.votes.clear();
                meta.consensus = None;
                to_line(&CommitRow {
                    meta,
                    bundle: st.bundles.get(&r.commit_id).cloned(),
                })
            })
            .collect();
        write_atomic(&self.dir.join(COMMITS), &text)
    }

    pub fn export_lines(&self) -> Vec<ExportLine> {
        let st = self.read();
        let mut out = vec![ExportLine::Annotators {
            annotators: st.annotators.clone(),
        }];
        out.extend(st.records.values().map(|r| ExportLine::Record {
            record: r.clone(),
            bundle: st.bundles.get(&r.commit_id).cloned(),
        }));
        out
    }

    pub fn export(&self, path: &Path) -> Result<usize, StoreError> {
        let lines = self.export_lines();
        let text: String = lines.iter().map(to_line).collect();
        write_atomic(path, &text)?;
        Ok(lines.len() - 1)
    }

    /// Loads an export file. Annotators it names are registered; records
    /// go through [`Store::put_record`].
    pub fn import(&self, path: &Path) -> Result<usize, StoreError> {
        let mut n = 0;
        for line in read_rows::<ExportLine>(path)? {
            match line {
                ExportLine::Annotators { annotators } => {
                    for a in &annotators {
                        self.register_annotator(a)?;
                    }
                }
                ExportLine::Record { record, bundle } => {
                    self.put_record(record, bundle)?;
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn stats(&self, top_repos: usize) -> DatasetStats {
        DatasetStats::compute(&self.records(), top_repos)
    }
}

fn validate_annotators(list: &[String]) -> Result<(), StoreError> {
    for (i, a) in list.iter().enumerate() {
        if a.trim().is_empty() || a.trim() != a {
            return Err(StoreError::InvalidRecord(format!("bad annotator id {a:?}")));
        }
        if list[..i].contains(a) {
            return Err(StoreError::InvalidRecord(format!("duplicate annotator {a}")));
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, text: &str) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(text.as_bytes()).map_err(|e| StoreError::io(path, e))?;
        w.flush().map_err(|e| StoreError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}
