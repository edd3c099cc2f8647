//! HTTP+JSON routes. Every request except `/health` carries
//! `Authorization: Bearer <token>`; assessor tokens see only their own
//! work, the admin token may read all progress and trigger exports.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::campaign::{Ack, AssignmentItem, Campaign, DocumentPayload, ExportResult, Progress, TopicPayload};
use crate::error::{JudgeError, Result};

#[derive(Clone)]
pub struct AppState {
    pub campaign: Arc<Campaign>,
    /// Export automatically once every assignment is complete.
    pub export_on_complete: bool,
    exported: Arc<AtomicBool>,
}

impl AppState {
    pub fn new(campaign: Arc<Campaign>, export_on_complete: bool) -> Self {
        AppState {
            campaign,
            export_on_complete,
            exported: Arc::new(AtomicBool::new(false)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub topic_id: String,
    pub doc_id: String,
    pub grade: i64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExportRequest {
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExportSummary {
    pub judgments: usize,
    pub topics: usize,
    pub kappa: BTreeMap<String, Option<f64>>,
    pub noise_fraction: Option<f64>,
    pub flagged_assessors: Vec<String>,
    pub log_sha256: String,
    pub qrels_sha256: String,
}

impl From<&ExportResult> for ExportSummary {
    fn from(r: &ExportResult) -> Self {
        ExportSummary {
            judgments: r.qrels.len(),
            topics: r.qrels.topic_ids().count(),
            kappa: r.agreement.iter().map(|a| (a.topic_id.clone(), a.kappa)).collect(),
            noise_fraction: r.noise.as_ref().map(|n| n.overall.fraction()),
            flagged_assessors: r
                .noise
                .as_ref()
                .map(|n| n.flagged().into_iter().map(str::to_string).collect())
                .unwrap_or_default(),
            log_sha256: r.log_sha256.clone(),
            qrels_sha256: r.qrels_sha256.clone(),
        }
    }
}

enum Caller {
    Assessor(String),
    Admin,
}

fn caller(state: &AppState, headers: &HeaderMap) -> Result<Caller> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or(JudgeError::Unauthorized)?;
    if state.campaign.is_admin_token(token) {
        return Ok(Caller::Admin);
    }
    state
        .campaign
        .assessor_for_token(token)
        .map(|a| Caller::Assessor(a.to_string()))
        .ok_or(JudgeError::Unauthorized)
}

fn assessor(state: &AppState, headers: &HeaderMap) -> Result<String> {
    match caller(state, headers)? {
        Caller::Assessor(a) => Ok(a),
        Caller::Admin => Err(JudgeError::Forbidden("this endpoint is for assessors".into())),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/assignment", get(assignment))
        .route("/topics", get(topics))
        .route("/doc/{topic}/{doc}", get(document))
        .route("/judgment", post(judgment))
        .route("/progress", get(progress))
        .route("/export", post(export))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn assignment(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Vec<AssignmentItem>>> {
    let who = assessor(&state, &headers)?;
    Ok(Json(state.campaign.get_assignment(&who)?))
}

async fn topics(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Vec<TopicPayload>>> {
    let who = assessor(&state, &headers)?;
    Ok(Json(state.campaign.topics_for(&who)))
}

async fn document(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path((topic, doc)): Path<(String, String)>,
) -> Result<Json<DocumentPayload>> {
    let who = assessor(&state, &headers)?;
    let campaign = state.campaign.clone();
    let payload = tokio::task::spawn_blocking(move || campaign.get_document(&who, &topic, &doc))
        .await
        .map_err(|e| JudgeError::Io(std::io::Error::other(e)))??;
    Ok(Json(payload))
}

async fn judgment(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: std::result::Result<Json<JudgmentRequest>, JsonRejection>,
) -> Result<Json<Ack>> {
    let who = assessor(&state, &headers)?;
    let Json(req) = body.map_err(|e| JudgeError::BadRequest(e.body_text()))?;
    let grade = i8::try_from(req.grade).map_err(|_| JudgeError::BadRequest(format!("grade {} outside -1..=2", req.grade)))?;
    let campaign = state.campaign.clone();
    let ack = tokio::task::spawn_blocking(move || campaign.submit_judgment(&who, &req.topic_id, &req.doc_id, grade))
        .await
        .map_err(|e| JudgeError::Io(std::io::Error::other(e)))??;
    if state.export_on_complete && state.campaign.is_complete() && !state.exported.swap(true, Ordering::SeqCst) {
        let campaign = state.campaign.clone();
        let done = tokio::task::spawn_blocking(move || campaign.export(false))
            .await
            .map_err(|e| JudgeError::Io(std::io::Error::other(e)))?;
        if done.is_err() {
            state.exported.store(false, Ordering::SeqCst);
        }
        done?;
    }
    Ok(Json(ack))
}

async fn progress(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Value>> {
    match caller(&state, &headers)? {
        Caller::Assessor(a) => {
            let p: Progress = state.campaign.progress(&a);
            Ok(Json(json!({ "assessor_id": a, "judged": p.judged, "assigned": p.assigned })))
        }
        Caller::Admin => Ok(Json(json!({ "assessors": state.campaign.all_progress() }))),
    }
}

async fn export(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Option<Json<ExportRequest>>,
) -> Result<Json<ExportSummary>> {
    match caller(&state, &headers)? {
        Caller::Admin => {}
        Caller::Assessor(_) => return Err(JudgeError::Forbidden("export needs the admin token".into())),
    }
    let force = body.map(|Json(b)| b.force).unwrap_or(false);
    let campaign = state.campaign.clone();
    let result = tokio::task::spawn_blocking(move || campaign.export(force))
        .await
        .map_err(|e| JudgeError::Io(std::io::Error::other(e)))??;
    Ok(Json(ExportSummary::from(&result)))
}

/// Serve the campaign until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
