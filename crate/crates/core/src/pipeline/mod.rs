// SPDX-License-Identifier: Apache-2.0

//! The three candidate-collection stages. Each reads commits, decides
//! per commit whether to enqueue it, and inserts new candidates into a
//! [`Store`]. Commits already stored are counted as duplicates, so
//! re-running a stage adds nothing.
//!
//! * [`run_base`]: commits linked from vulnerability references
//! * [`run_pilot`]: commits whose message matches a security keyword
//! * [`run_augmented`]: commits the classifier scores at or above the
//!   threshold

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitcpg::{build_commit_cpg, SliceOptions};
use crate::embed::{embed_graph, Embedder, FileEmbedder, HashEmbedder, DEFAULT_EMBED_DIM};
use crate::ingest::{parse_cve_reference, CommitBundle, CommitRef, CommitSource, FixtureSource, IngestError, SourceFilter};
use crate::keywords::{match_keywords, KeywordError, KeywordSet};
use crate::model::{classify, ModelConfig, ModelError, ModelParams};
use crate::patterns::{tag, PatternError, SecureApiTable};
use crate::store::{LabelRecord, Origin, Store, StoreError};

/// Failures that stop a stage. Per-commit problems are reported as
/// [`Skip`]s instead.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Keywords(#[from] KeywordError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Patterns(#[from] PatternError),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// How node tokens become vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub seed: u64,
    /// Token-vector file; replaces the hash embedder when set.
    pub vectors: Option<PathBuf>,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: DEFAULT_EMBED_DIM,
            seed: 0,
            vectors: None,
        }
    }
}

impl EmbedConfig {
    pub fn embedder(&self) -> Result<Box<dyn Embedder>, PipelineError> {
        match &self.vectors {
            Some(p) => Ok(Box::new(FileEmbedder::load(p).map_err(|e| PipelineError::Config(e.to_string()))?)),
            None if self.dim == 0 => Err(PipelineError::Config("embedding dimension must be positive".into())),
            None => Ok(Box::new(HashEmbedder::new(self.dim, self.seed))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    /// Keyword file; the built-in list when unset.
    pub keyword_file: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub embed: EmbedConfig,
    /// Classifier threshold; the checkpoint's own when unset.
    pub threshold: Option<f64>,
    /// Glob patterns of paths to leave out of analysis.
    pub exclude: Vec<String>,
    pub api_table: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
}

impl PipelineConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            data_dir: data_dir.into(),
            keyword_file: None,
            checkpoint: None,
            embed: EmbedConfig::default(),
            threshold: None,
            exclude: Vec::new(),
            api_table: None,
            workers: 0,
        }
    }

    /// Checks that every referenced file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let files = [&self.keyword_file, &self.checkpoint, &self.embed.vectors, &self.api_table];
        for p in files.into_iter().flatten() {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(PipelineError::Config(format!("threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn source_filter(&self) -> SourceFilter {
        SourceFilter {
            exclude: self.exclude.clone(),
            ..SourceFilter::default()
        }
    }

    pub fn keywords(&self) -> Result<KeywordSet, PipelineError> {
        match &self.keyword_file {
            Some(p) => Ok(KeywordSet::load(p)?),
            None => Ok(KeywordSet::default()),
        }
    }

    pub fn api_table(&self) -> Result<SecureApiTable, PipelineError> {
        match &self.api_table {
            Some(p) => Ok(SecureApiTable::load(p)?),
            None => Ok(SecureApiTable::default()),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// A commit that was not enqueued because it could not be processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    /// Commit id, or the input row when no commit could be identified.
    pub item: String,
    /// Machine-readable reason.
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub processed: usize,
    /// Newly stored candidates.
    pub stored: Vec<String>,
    /// Candidates that were already in the store.
    pub duplicates: Vec<String>,
    /// Processed without error but not selected (no keyword, low score).
    pub rejected: usize,
    pub skipped: Vec<Skip>,
}

enum Outcome {
    Candidate(Box<LabelRecord>, Box<CommitBundle>),
    Rejected,
    Skipped(Skip),
}

fn skip(item: &str, code: &str, message: impl ToString) -> Outcome {
    Outcome::Skipped(Skip {
        item: item.to_string(),
        code: code.to_string(),
        message: message.to_string(),
    })
}

fn ref_id(r: &CommitRef) -> String {
    format!("{}__{}@{}", r.owner, r.repo, r.hash)
}

/// Inserts candidates in input order, so reports are reproducible
/// regardless of worker scheduling.
fn collect(stage: &str, store: &Store, outcomes: Vec<Outcome>) -> Result<StageReport, PipelineError> {
    let mut report = StageReport {
        stage: stage.to_string(),
        processed: outcomes.len(),
        ..StageReport::default()
    };
    for o in outcomes {
        match o {
            Outcome::Candidate(record, bundle) => {
                let id = record.commit_id.clone();
                if store.insert_candidate(*record, Some(*bundle))? {
                    report.stored.push(id);
                } else {
                    report.duplicates.push(id);
                }
            }
            Outcome::Rejected => report.rejected += 1,
            Outcome::Skipped(s) => report.skipped.push(s),
        }
    }
    Ok(report)
}

/// Applies the source filter; bundles left without files are skipped.
fn source_only(bundle: CommitBundle, filter: &SourceFilter) -> Result<CommitBundle, Outcome> {
    let id = bundle.commit_id();
    match filter.apply(&bundle) {
        Ok(b) if b.files.is_empty() => Err(skip(&id, "NoSourceFiles", "no changed source file")),
        Ok(b) => Ok(b),
        Err(e) => Err(skip(&id, e.code(), e)),
    }
}

fn annotate(record: &mut LabelRecord, bundle: &CommitBundle, keywords: &KeywordSet, table: &SecureApiTable) {
    record.matched_keywords = match_keywords(&bundle.message, keywords);
    record.pattern = Some(tag(bundle, table));
}

/// One reference row: `cve_id<TAB>url[<TAB>cwe]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CveRow {
    pub line: usize,
    pub cve: String,
    pub url: String,
    pub cwe: Option<String>,
}

/// Reads a reference table. Blank lines and `#` comments are ignored.
pub fn read_cve_rows(path: &Path) -> Result<Vec<CveRow>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t').map(str::trim);
        let cve = cols.next().unwrap_or_default().to_string();
        let url = cols.next().unwrap_or_default().to_string();
        let cwe = cols.next().filter(|c| !c.is_empty()).map(str::to_string);
        rows.push(CveRow { line: i + 1, cve, url, cwe });
    }
    Ok(rows)
}

/// Fetches every referenced commit and stores it with origin `base`.
pub fn run_base(cfg: &PipelineConfig, store: &Store, source: &dyn CommitSource, refs: &Path) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let rows = read_cve_rows(refs)?;
    let keywords = cfg.keywords()?;
    let table = cfg.api_table()?;
    let filter = cfg.source_filter();
    let outcomes = cfg.pool()?.install(|| {
        rows.par_iter()
            .map(|row| {
                let item = format!("{}:{}", row.line, row.cve);
                let r = match parse_cve_reference(&row.url) {
                    Ok(r) => r,
                    Err(e) => return skip(&item, e.code(), e),
                };
                let bundle = match source.fetch_commit(&r.owner, &r.repo, &r.hash) {
                    Ok(b) => b,
                    Err(e) => return skip(&ref_id(&r), e.code(), e),
                };
                let bundle = match source_only(bundle, &filter) {
                    Ok(b) => b,
                    Err(o) => return o,
                };
                let mut record = LabelRecord::new(bundle.commit_id(), Origin::Base);
                record.cwe = row.cwe.clone();
                annotate(&mut record, &bundle, &keywords, &table);
                Outcome::Candidate(Box::new(record), Box::new(bundle))
            })
            .collect()
    });
    collect("base", store, outcomes)
}

fn list_commits(dir: &Path) -> Result<(FixtureSource, Vec<CommitRef>), PipelineError> {
    let src = FixtureSource::new(dir);
    let refs = src.list()?;
    Ok((src, refs))
}

/// Stores commits from `commit_dir` whose message matches at least one
/// keyword, with origin `pilot`.
pub fn run_pilot(cfg: &PipelineConfig, store: &Store, commit_dir: &Path, keywords: &KeywordSet) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let (src, refs) = list_commits(commit_dir)?;
    let table = cfg.api_table()?;
    let outcomes = cfg.pool()?.install(|| {
        refs.par_iter()
            .map(|r| {
                let bundle = match src.fetch_commit(&r.owner, &r.repo, &r.hash) {
                    Ok(b) => b,
                    Err(e) => return skip(&ref_id(r), e.code(), e),
                };
                let mut record = LabelRecord::new(bundle.commit_id(), Origin::Pilot);
                annotate(&mut record, &bundle, keywords, &table);
                if record.matched_keywords.is_empty() {
                    Outcome::Rejected
                } else {
                    Outcome::Candidate(Box::new(record), Box::new(bundle))
                }
            })
            .collect()
    });
    collect("pilot", store, outcomes)
}

/// Loaded classifier.
pub struct Classifier {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub threshold: f64,
}

impl Classifier {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let path = cfg
            .checkpoint
            .as_ref()
            .ok_or_else(|| PipelineError::Config("no checkpoint configured".into()))?;
        let (config, params) = crate::model::Checkpoint::load(path)?.into_model()?;
        let threshold = cfg.threshold.unwrap_or(config.threshold);
        Ok(Classifier { config, params, threshold })
    }
}

/// Builds, embeds and scores every commit in `commit_dir`; stores those
/// scored at or above the threshold with origin `augmented`.
pub fn run_augmented(cfg: &PipelineConfig, store: &Store, commit_dir: &Path, model: &Classifier) -> Result<StageReport, PipelineError> {
    cfg.validate()?;
    let embedder = cfg.embed.embedder()?;
    if embedder.dim() != model.config.embed_dim {
        return Err(PipelineError::Config(format!(
            "embedder width {} does not match the model's {}",
            embedder.dim(),
            model.config.embed_dim
        )));
    }
    let (src, refs) = list_commits(commit_dir)?;
    let keywords = cfg.keywords()?;
    let table = cfg.api_table()?;
    let filter = cfg.source_filter();
    let opts = SliceOptions::default();
    let outcomes = cfg.pool()?.install(|| {
        refs.par_iter()
            .map(|r| {
                let bundle = match src.fetch_commit(&r.owner, &r.repo, &r.hash) {
                    Ok(b) => b,
                    Err(e) => return skip(&ref_id(r), e.code(), e),
                };
                let bundle = match source_only(bundle, &filter) {
                    Ok(b) => b,
                    Err(o) => return o,
                };
                let id = bundle.commit_id();
                let graph = match build_commit_cpg(&bundle, &filter, &opts) {
                    Ok(g) => g,
                    Err(e) => return skip(&id, e.code(), e),
                };
                let embedded = match embed_graph(&graph.graph, embedder.as_ref(), &id, None) {
                    Ok(g) => g,
                    Err(e) => return skip(&id, "EmbedFailed", e),
                };
                let p = match classify(&model.params, &embedded, &model.config, model.threshold) {
                    Ok(p) => p,
                    Err(e) => return skip(&id, e.code(), e),
                };
                if p.probability < model.threshold {
                    return Outcome::Rejected;
                }
                let mut record = LabelRecord::new(id, Origin::Augmented);
                record.model_score = Some(p.probability);
                annotate(&mut record, &bundle, &keywords, &table);
                Outcome::Candidate(Box::new(record), Box::new(bundle))
            })
            .collect()
    });
    collect("augmented", store, outcomes)
}
