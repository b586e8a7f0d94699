// SPDX-License-Identifier: Apache-2.0

//! Security keyword mining from commit summaries and keyword-based
//! filtering of commit messages.

mod lda;
mod text;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lda::{fit_lda, LdaConfig, LdaModel};
pub use text::{is_stopword, match_keywords, ngram_tokenize, sentences, word_tokens, STOPWORDS};

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("keyword file line {line}: {message}")]
    BadKeywordFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KeywordError {
    pub fn code(&self) -> &'static str {
        match self {
            KeywordError::EmptyCorpus => "EmptyCorpus",
            KeywordError::BadConfig(_) => "BadConfig",
            KeywordError::BadKeywordFile { .. } => "BadKeywordFile",
            KeywordError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryLabel {
    Security,
    NonSecurity,
    Unknown,
}

/// Text describing one commit: its message plus any weakness and
/// advisory descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub commit_id: String,
    pub text: String,
    pub label: SummaryLabel,
}

impl SummaryDoc {
    /// Joins the non-empty parts with blank lines. Returns `None` when
    /// every part is empty.
    pub fn new(commit_id: &str, message: &str, cwe: Option<&str>, cve: Option<&str>, label: SummaryLabel) -> Option<Self> {
        let parts: Vec<&str> = [Some(message), cwe, cve]
            .into_iter()
            .flatten()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if parts.is_empty() {
            return None;
        }
        Some(SummaryDoc {
            commit_id: commit_id.to_string(),
            text: parts.join("\n\n"),
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub phrase: String,
    pub n: usize,
    pub frequency: u64,
    pub correlation: f64,
}

/// Deduplicated lowercase phrases of one to three words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub entries: Vec<KeywordEntry>,
}

const DEFAULT_UNIGRAMS: [&str; 14] = [
    "attack", "bypass", "cve", "dos", "exploit", "injection", "leakage", "malicious", "overflow", "smuggling", "spoofing", "unauthorized",
    "underflow", "vulnerability",
];
const DEFAULT_BIGRAMS: [&str; 3] = ["access control", "open redirect", "race condition"];
const DEFAULT_TRIGRAMS: [&str; 3] = ["denial of service", "out of bound", "dot dot slash"];

impl Default for KeywordSet {
    fn default() -> Self {
        KeywordSet::default_set()
    }
}

impl KeywordSet {
    /// The shipped security keyword list (frequency 0, correlation 1).
    pub fn default_set() -> Self {
        let mut ks = KeywordSet::new();
        for p in DEFAULT_UNIGRAMS.iter().chain(&DEFAULT_BIGRAMS).chain(&DEFAULT_TRIGRAMS) {
            ks.insert(p, 0, 1.0).expect("default phrases are valid");
        }
        ks
    }

    pub fn new() -> Self {
        KeywordSet { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.iter().any(|e| e.phrase == phrase)
    }

    pub fn phrases(&self, n: usize) -> Vec<&str> {
        self.entries.iter().filter(|e| e.n == n).map(|e| e.phrase.as_str()).collect()
    }

    /// Normalizes the phrase (lowercase, single spaces) and adds it unless
    /// already present. Returns whether it was added.
    pub fn insert(&mut self, phrase: &str, frequency: u64, correlation: f64) -> Result<bool, KeywordError> {
        let words = word_tokens(phrase);
        if words.is_empty() || words.len() > 3 {
            return Err(KeywordError::BadConfig(format!("phrase {phrase:?} must have 1 to 3 words")));
        }
        if !(0.0..=1.0).contains(&correlation) {
            return Err(KeywordError::BadConfig(format!("correlation {correlation} outside [0, 1]")));
        }
        let phrase = words.join(" ");
        if self.contains(&phrase) {
            return Ok(false);
        }
        self.entries.push(KeywordEntry {
            phrase,
            n: words.len(),
            frequency,
            correlation,
        });
        Ok(true)
    }

    /// One line per entry: `n<TAB>phrase<TAB>frequency<TAB>correlation`.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\t{}\n", e.n, e.phrase, e.frequency, e.correlation))
            .collect()
    }

    /// Parses the line format of [`KeywordSet::to_text`]. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, KeywordError> {
        let mut ks = KeywordSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let bad = |message: String| KeywordError::BadKeywordFile { line: line_no, message };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [n, phrase, freq, corr] = fields[..] else {
                return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
            };
            let n: usize = n.trim().parse().map_err(|_| bad(format!("bad n {n:?}")))?;
            let frequency: u64 = freq.trim().parse().map_err(|_| bad(format!("bad frequency {freq:?}")))?;
            let correlation: f64 = corr.trim().parse().map_err(|_| bad(format!("bad correlation {corr:?}")))?;
            let words = word_tokens(phrase);
            if words.len() != n {
                return Err(bad(format!("phrase {phrase:?} does not have {n} words")));
            }
            if !ks.insert(phrase, frequency, correlation).map_err(|e| bad(e.to_string()))? {
                return Err(bad(format!("duplicate phrase {phrase:?}")));
            }
        }
        Ok(ks)
    }

    pub fn load(path: &Path) -> Result<Self, KeywordError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), KeywordError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Occurrence counts of one phrase in the two corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPhrase {
    pub phrase: String,
    pub n: usize,
    /// Occurrences in security documents.
    pub frequency: u64,
    pub nonsecurity_count: u64,
    /// Share of all occurrences that fall in security documents.
    pub correlation: f64,
}

fn count_phrases(docs: &[&str]) -> BTreeMap<(usize, String), u64> {
    let mut counts = BTreeMap::new();
    for d in docs {
        for n in 1..=3 {
            for p in ngram_tokenize(d, n) {
                *counts.entry((n, p)).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Scores every 1- to 3-gram that occurs in at least one security
/// document, ordered by n then phrase.
pub fn score_tokens(security_docs: &[&str], nonsecurity_docs: &[&str]) -> Vec<ScoredPhrase> {
    let sec = count_phrases(security_docs);
    let non = count_phrases(nonsecurity_docs);
    sec.into_iter()
        .map(|((n, phrase), s)| {
            let o = non.get(&(n, phrase.clone())).copied().unwrap_or(0);
            ScoredPhrase {
                phrase,
                n,
                frequency: s,
                nonsecurity_count: o,
                correlation: s as f64 / (s + o) as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub freq_min: u64,
    pub corr_min: f64,
    /// Words kept from each selected topic.
    pub top_words: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            freq_min: 5,
            corr_min: 0.8,
            top_words: 10,
        }
    }
}

/// Keeps phrases passing both thresholds. With a topic model, also keeps
/// the top words of every topic whose top words include a seed term.
pub fn extract_keywords(table: &[ScoredPhrase], cfg: &ExtractConfig, lda: Option<&LdaModel>, seed_terms: &[&str]) -> KeywordSet {
    let mut ks = KeywordSet::new();
    for s in table {
        if s.frequency >= cfg.freq_min && s.correlation >= cfg.corr_min {
            // Table phrases come from the tokenizer, so they are valid.
            let _ = ks.insert(&s.phrase, s.frequency, s.correlation);
        }
    }
    if let Some(model) = lda {
        let seeds: Vec<String> = seed_terms.iter().map(|s| s.to_lowercase()).collect();
        for k in 0..model.phi.len() {
            let top = model.top_words(k, cfg.top_words);
            if !top.iter().any(|w| seeds.contains(w)) {
                continue;
            }
            for w in top {
                let (freq, corr) = table
                    .iter()
                    .find(|s| s.n == 1 && s.phrase == w)
                    .map_or((0, 0.0), |s| (s.frequency, s.correlation));
                let _ = ks.insert(&w, freq, corr);
            }
        }
    }
    ks
}

/// Tokens fed to the topic model: stopword-filtered unigrams.
pub fn lda_tokens(text: &str) -> Vec<String> {
    ngram_tokenize(text, 1)
}
