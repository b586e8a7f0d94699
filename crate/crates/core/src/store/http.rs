// SPDX-License-Identifier: Apache-2.0

//! JSON-over-HTTP front of a [`Store`] for the triage client.
//!
//! | method | path                               | body / result |
//! |--------|------------------------------------|---------------|
//! | GET    | `/api/candidates?status=&origin=&source=` | `[CandidateSummary]` |
//! | GET    | `/api/commits/{id}`                | `CommitDetail` |
//! | POST   | `/api/commits/{id}/votes`          | `{annotator, label}` → `LabelRecord`, 409 once finalized |
//! | GET    | `/api/commits/{id}/consensus`      | `{status, consensus?}` |
//! | GET    | `/api/stats/{table}`               | composition, efficiency, patterns, repos or cwe |
//! | POST   | `/api/ingest`                      | `IngestRequest` → `{commit_id, created}` |
//!
//! The annotator may also be given in the `x-annotator-id` header.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{CandidateFilter, CandidateSource, Consensus, ConsensusOutcome, LabelRecord, Origin, Status, Store, StoreError, VoteLabel};
use crate::commitcpg::{build_commit_cpg, SliceOptions};
use crate::ingest::{parse_unified_diff, CommitBundle, FileChange, SourceFilter};
use crate::keywords::{match_keywords, KeywordSet};
use crate::patterns::{tag, PatternCategory, PatternLabel, SecureApiTable};

/// Shared handler state.
pub struct AppState {
    pub store: Arc<Store>,
    pub keywords: KeywordSet,
    pub api_table: SecureApiTable,
    pub filter: SourceFilter,
}

impl AppState {
    pub fn new(store: Arc<Store>) -> Self {
        AppState {
            store,
            keywords: KeywordSet::default(),
            api_table: SecureApiTable::default(),
            filter: SourceFilter::default(),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "BadRequest",
            message: message.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::UnknownAnnotator(_) | StoreError::InvalidRecord(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::ConflictingWrite { .. } => StatusCode::CONFLICT,
            StoreError::Corrupt { .. } | StoreError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ErrorBody {
    error: String,
    message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.code.to_string(),
                message: self.message,
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub commit_id: String,
    pub origin: Origin,
    pub source: CandidateSource,
    pub status: Status,
    /// Latest vote per annotator.
    pub votes: BTreeMap<String, VoteLabel>,
    pub consensus: Option<Consensus>,
    pub model_score: Option<f64>,
    pub matched_keywords: Vec<String>,
    pub pattern: Option<PatternCategory>,
}

impl From<&LabelRecord> for CandidateSummary {
    fn from(r: &LabelRecord) -> Self {
        CandidateSummary {
            commit_id: r.commit_id.clone(),
            origin: r.origin,
            source: r.source(),
            status: r.status(),
            votes: r.final_votes().into_iter().map(|(a, l)| (a.to_string(), l)).collect(),
            consensus: r.consensus,
            model_score: r.model_score,
            matched_keywords: r.matched_keywords.clone(),
            pattern: r.pattern.as_ref().map(|p| p.category),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpgSummary {
    pub units: usize,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitDetail {
    pub record: LabelRecord,
    pub bundle: Option<CommitBundle>,
    pub matched_keywords: Vec<String>,
    pub model_score: Option<f64>,
    pub pattern: Option<PatternLabel>,
    /// `None` when the bundle is missing or its graph cannot be built.
    pub commitcpg_summary: Option<CpgSummary>,
}

#[derive(Debug, Clone, Deserialize)]
struct CandidateQuery {
    status: Option<String>,
    origin: Option<String>,
    source: Option<String>,
}

fn parse_opt<T: std::str::FromStr<Err = StoreError>>(v: &Option<String>) -> Result<Option<T>, ApiError> {
    match v.as_deref() {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|e: StoreError| ApiError::bad_request(e.to_string())),
    }
}

async fn candidates(State(app): State<Arc<AppState>>, Query(q): Query<CandidateQuery>) -> ApiResult<Vec<CandidateSummary>> {
    let filter = CandidateFilter {
        status: parse_opt(&q.status)?,
        origin: parse_opt(&q.origin)?,
        source: parse_opt(&q.source)?,
    };
    Ok(Json(app.store.list_candidates(&filter).iter().map(CandidateSummary::from).collect()))
}

async fn commit_detail(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<CommitDetail> {
    let record = app.store.get_record(&id)?;
    let bundle = app.store.get_bundle(&id)?;
    let commitcpg_summary = bundle.as_ref().and_then(|b| {
        build_commit_cpg(b, &app.filter, &SliceOptions::default()).ok().map(|g| CpgSummary {
            units: g.units.len(),
            nodes: g.graph.nodes.len(),
            edges: g.graph.edges.len(),
        })
    });
    Ok(Json(CommitDetail {
        matched_keywords: record.matched_keywords.clone(),
        model_score: record.model_score,
        pattern: record.pattern.clone(),
        record,
        bundle,
        commitcpg_summary,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteRequest {
    #[serde(default)]
    pub annotator: Option<String>,
    pub label: VoteLabel,
}

async fn vote(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<VoteRequest>,
) -> ApiResult<LabelRecord> {
    let annotator = req
        .annotator
        .or_else(|| headers.get("x-annotator-id").and_then(|v| v.to_str().ok()).map(str::to_string))
        .ok_or_else(|| ApiError::bad_request("annotator missing"))?;
    Ok(Json(app.store.vote_and_settle(&id, &annotator, req.label)?))
}

async fn consensus(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ConsensusOutcome> {
    Ok(Json(app.store.consensus(&id)?))
}

async fn stats_table(State(app): State<Arc<AppState>>, Path(table): Path<String>) -> Result<Response, ApiError> {
    let s = app.store.stats(10);
    Ok(match table.as_str() {
        "composition" => Json(s.composition).into_response(),
        "efficiency" => Json(s.efficiency).into_response(),
        "patterns" => Json(s.patterns).into_response(),
        "repos" => Json(s.repos).into_response(),
        "cwe" => Json(s.cwe).into_response(),
        other => {
            return Err(ApiError {
                status: StatusCode::NOT_FOUND,
                code: "NotFound",
                message: format!("no stats table {other:?}"),
            })
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestFile {
    pub path: String,
    #[serde(default)]
    pub pre_content: String,
    #[serde(default)]
    pub post_content: String,
}

/// A change given either as a unified diff or as file snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestRequest {
    #[serde(default)]
    pub repo_id: Option<String>,
    #[serde(default)]
    pub commit_hash: Option<String>,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub diff: Option<String>,
    #[serde(default)]
    pub files: Vec<IngestFile>,
    #[serde(default)]
    pub origin: Option<Origin>,
    #[serde(default)]
    pub cwe: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub commit_id: String,
    pub created: bool,
}

impl IngestRequest {
    pub fn to_bundle(&self) -> Result<CommitBundle, String> {
        let mut files: Vec<FileChange> = self
            .files
            .iter()
            .map(|f| FileChange::from_contents(f.path.clone(), f.pre_content.clone(), f.post_content.clone()))
            .collect();
        if let Some(diff) = &self.diff {
            for patch in parse_unified_diff(diff).map_err(|e| e.to_string())? {
                let (pre, _) = patch.sparse_contents();
                files.push(FileChange::from_patch(patch, pre).map_err(|e| e.to_string())?);
            }
        }
        if files.is_empty() {
            return Err("no diff or files given".into());
        }
        let bundle = CommitBundle {
            repo_id: self.repo_id.clone().unwrap_or_else(|| "local/local".into()),
            commit_hash: self.commit_hash.clone().unwrap_or_else(|| "local".into()),
            message: self.message.clone(),
            files,
            origin: Default::default(),
        };
        bundle.validate().map_err(|e| e.to_string())?;
        Ok(bundle)
    }
}

async fn ingest(State(app): State<Arc<AppState>>, Json(req): Json<IngestRequest>) -> Result<(StatusCode, Json<IngestResponse>), ApiError> {
    let bundle = req.to_bundle().map_err(ApiError::bad_request)?;
    let mut record = LabelRecord::new(bundle.commit_id(), req.origin.unwrap_or(Origin::Pilot));
    record.matched_keywords = match_keywords(&bundle.message, &app.keywords);
    let label = tag(&bundle, &app.api_table);
    record.pattern = Some(label);
    record.cwe = req.cwe.clone();
    let commit_id = record.commit_id.clone();
    let created = app.store.insert_candidate(record, Some(bundle))?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(IngestResponse { commit_id, created })))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/candidates", get(candidates))
        .route("/api/commits/:id", get(commit_detail))
        .route("/api/commits/:id/votes", post(vote))
        .route("/api/commits/:id/consensus", get(consensus))
        .route("/api/stats/:table", get(stats_table))
        .route("/api/ingest", post(ingest))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
