//! HTTP API over evaluation projects: project management, corpus and sheet
//! import, item assignment, decision-tree sessions, annotation submission,
//! progress and reports.
//!
//! Every mutation is persisted to the project file before it becomes visible.
//! Errors come back as `{"error": kind, "message": ..., "details": ...}`.

mod error;
mod state;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mtqe_core::ingestion::{export_sheet, import_corpus, import_sheet, Delimiter};
use mtqe_core::model::{
    Annotation, AnnotationKey, AnnotatorId, Project, ScoringConfig, Segment, SegmentId, Severities, SystemId,
    SystemOutput,
};
use mtqe_core::protocol::{finalize, Node, ProtocolState, Response as Answer};
use mtqe_core::reports::{render_report, OutputFormat, ReportKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuid::Uuid;

pub use error::ApiError;
pub use state::{ProjectHandle, Registry, ServiceConfig, PROJECT_EXT};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

type AppState = Arc<Registry>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project).delete(delete_project))
        .route("/projects/{id}/segments", get(list_segments))
        .route("/projects/{id}/systems", get(list_systems))
        .route("/projects/{id}/annotators", get(list_annotators).post(add_annotator))
        .route("/projects/{id}/tree", get(get_tree))
        .route("/projects/{id}/corpus", post(post_corpus))
        .route("/projects/{id}/sheets", get(get_sheet).post(post_sheet))
        .route("/projects/{id}/next-item", get(next_item))
        .route("/projects/{id}/session/start", post(session_start))
        .route("/projects/{id}/session/answer", post(session_answer))
        .route("/projects/{id}/session/finalize", post(session_finalize))
        .route("/projects/{id}/session/{session_id}", get(session_get))
        .route(
            "/projects/{id}/annotations",
            get(list_annotations).post(post_annotation),
        )
        .route("/projects/{id}/progress", get(progress))
        .route("/projects/{id}/reports/{kind}", get(report))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(registry)
}

/// Binds `config.listen` and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let registry = Registry::open(&config.data_dir, config.project_file.as_deref())?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(registry)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Project(#[from] mtqe_core::ingestion::ProjectFileError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn annotator_from(headers: &HeaderMap) -> ApiResult<AnnotatorId> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(AnnotatorId::new)
        .ok_or_else(|| ApiError::bad_request(format!("missing `{ANNOTATOR_HEADER}` header")))
}

fn require_annotator(project: &Project, id: &AnnotatorId) -> ApiResult<()> {
    if project.has_annotator(id) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "UnknownAnnotator",
            format!("unknown annotator `{id}`"),
        ))
    }
}

fn find_item<'a>(
    project: &'a Project,
    segment: &SegmentId,
    system: &SystemId,
) -> ApiResult<(&'a Segment, &'a SystemOutput)> {
    let seg = project
        .segment(segment)
        .ok_or_else(|| ApiError::not_found(format!("no segment `{segment}`")))?;
    let out = project
        .output(segment, system)
        .ok_or_else(|| ApiError::not_found(format!("no output of `{system}` for segment `{segment}`")))?;
    Ok((seg, out))
}

// ---------------------------------------------------------------------------
// projects

#[derive(Debug, Serialize)]
struct ProjectSummary {
    id: String,
    name: String,
    segments: usize,
    systems: Vec<SystemId>,
    annotators: Vec<AnnotatorId>,
    annotations: usize,
    tree_version: String,
    config: ScoringConfig,
}

fn summary(h: &ProjectHandle) -> ProjectSummary {
    let p = h.snapshot();
    ProjectSummary {
        id: h.id.clone(),
        name: p.name.clone(),
        segments: p.segments.len(),
        systems: p.systems(),
        annotators: p.annotators.clone(),
        annotations: p.annotations.len(),
        tree_version: p.taxonomy.version().to_owned(),
        config: p.config.clone(),
    }
}

#[derive(Debug, Deserialize)]
struct CreateProject {
    name: String,
    #[serde(default)]
    config: Option<ScoringConfig>,
    #[serde(default)]
    annotators: Vec<AnnotatorId>,
}

async fn list_projects(State(reg): State<AppState>) -> Json<Vec<ProjectSummary>> {
    Json(reg.list().iter().map(|h| summary(h)).collect())
}

async fn create_project(State(reg): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<ProjectSummary>)> {
    let req: CreateProject = parse_body(&body)?;
    if req.name.trim().is_empty() {
        return Err(ApiError::bad_request("project name is empty"));
    }
    let handle = reg.create(&req.name, req.config)?;
    if !req.annotators.is_empty() {
        handle.mutate(|p| {
            for a in req.annotators {
                p.add_annotator(a);
            }
            Ok(())
        })?;
    }
    Ok((StatusCode::CREATED, Json(summary(&handle))))
}

async fn get_project(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ProjectSummary>> {
    Ok(Json(summary(&*reg.get(&id)?)))
}

async fn delete_project(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    reg.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_segments(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<Segment>>> {
    Ok(Json(reg.get(&id)?.snapshot().segments.clone()))
}

async fn list_systems(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<SystemId>>> {
    Ok(Json(reg.get(&id)?.snapshot().systems()))
}

async fn list_annotators(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<AnnotatorId>>> {
    Ok(Json(reg.get(&id)?.snapshot().annotators.clone()))
}

#[derive(Debug, Deserialize)]
struct NewAnnotator {
    id: AnnotatorId,
}

async fn add_annotator(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Vec<AnnotatorId>>)> {
    let req: NewAnnotator = parse_body(&body)?;
    if req.id.as_str().trim().is_empty() {
        return Err(ApiError::bad_request("annotator id is empty"));
    }
    let list = reg.get(&id)?.mutate(|p| {
        p.add_annotator(req.id);
        Ok(p.annotators.clone())
    })?;
    Ok((StatusCode::CREATED, Json(list)))
}

async fn get_tree(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let p = reg.get(&id)?.snapshot();
    Ok(Json(serde_json::to_value(&p.taxonomy).expect("tree serializes")))
}

// ---------------------------------------------------------------------------
// import / export

async fn post_corpus(State(reg): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let summary = reg.get(&id)?.mutate(|p| Ok(import_corpus(&body[..], p)?))?;
    Ok((StatusCode::OK, Json(summary)).into_response())
}

#[derive(Debug, Deserialize)]
struct SheetQuery {
    system: SystemId,
    annotator: AnnotatorId,
    #[serde(default)]
    delimiter: Option<String>,
}

/// Imports a sheet all-or-nothing: any rejected row aborts the import and
/// every rejection is reported.
async fn post_sheet(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SheetQuery>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let result = reg.get(&id)?.mutate(|p| {
        let outcome = import_sheet(&body[..], q.system.clone(), q.annotator.clone(), p)?;
        if !outcome.rejected.is_empty() {
            return Err(ApiError::rejected_rows(&outcome.rejected));
        }
        let reply = json!({
            "rows_read": outcome.rows_read,
            "annotations": outcome.annotations.len(),
            "new_segments": outcome.new_segments.len(),
            "new_outputs": outcome.new_outputs.len(),
            "warnings": outcome.warnings,
        });
        outcome.commit(p)?;
        Ok(reply)
    })?;
    Ok(Json(result))
}

async fn get_sheet(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SheetQuery>,
) -> ApiResult<Response> {
    let delimiter = match q.delimiter.as_deref() {
        None | Some("tab") | Some("tsv") => Delimiter::Tab,
        Some("comma") | Some("csv") => Delimiter::Comma,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "unknown delimiter `{other}` (tab, comma)"
            )))
        }
    };
    let p = reg.get(&id)?.snapshot();
    let text = export_sheet(&p, &q.system, &q.annotator, delimiter)?;
    let ctype = match delimiter {
        Delimiter::Tab => "text/tab-separated-values; charset=utf-8",
        Delimiter::Comma => "text/csv; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, ctype)], text).into_response())
}

// ---------------------------------------------------------------------------
// assignment

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum NextItem {
    Item { segment: Segment, output: SystemOutput },
    Done,
}

/// Systems in project order, segments in corpus order, skipping items this
/// annotator already has an annotation for.
fn next_for(p: &Project, annotator: &AnnotatorId) -> NextItem {
    for system in p.systems() {
        for seg in &p.segments {
            let Some(out) = p.output(&seg.id, &system) else {
                continue;
            };
            let key = AnnotationKey {
                annotator_id: annotator.clone(),
                segment_id: seg.id.clone(),
                system_id: system.clone(),
            };
            if p.current_revision(&key) == 0 {
                return NextItem::Item {
                    segment: seg.clone(),
                    output: out.clone(),
                };
            }
        }
    }
    NextItem::Done
}

async fn next_item(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<NextItem>> {
    let annotator = annotator_from(&headers)?;
    let p = reg.get(&id)?.snapshot();
    require_annotator(&p, &annotator)?;
    Ok(Json(next_for(&p, &annotator)))
}

// ---------------------------------------------------------------------------
// sessions

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: Uuid,
    done: bool,
    node: Option<Node>,
    base_revision: u64,
    consumed: bool,
    state: ProtocolState,
}

fn view(project: &Project, session_id: Uuid, s: &state::Session) -> SessionView {
    SessionView {
        session_id,
        done: s.state.is_done(),
        node: project.taxonomy.current_node(&s.state).cloned(),
        base_revision: s.base_revision,
        consumed: s.consumed,
        state: s.state.clone(),
    }
}

#[derive(Debug, Deserialize)]
struct StartSession {
    segment_id: SegmentId,
    system_id: SystemId,
}

async fn session_start(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let annotator = annotator_from(&headers)?;
    let req: StartSession = parse_body(&body)?;
    let handle = reg.get(&id)?;
    let p = handle.snapshot();
    require_annotator(&p, &annotator)?;
    let (seg, out) = find_item(&p, &req.segment_id, &req.system_id)?;
    let state = p.taxonomy.start_session(seg, out, annotator.clone())?;
    let key = AnnotationKey {
        annotator_id: annotator,
        segment_id: req.segment_id,
        system_id: req.system_id,
    };
    let session = state::Session {
        state,
        base_revision: p.current_revision(&key),
        consumed: false,
    };
    let session_id = Uuid::new_v4();
    let v = view(&p, session_id, &session);
    handle.sessions.lock().insert(session_id, session);
    Ok((StatusCode::CREATED, Json(v)))
}

#[derive(Debug, Deserialize)]
struct AnswerSession {
    session_id: Uuid,
    response: Answer,
}

async fn session_answer(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let req: AnswerSession = parse_body(&body)?;
    let handle = reg.get(&id)?;
    let p = handle.snapshot();
    let mut sessions = handle.sessions.lock();
    let s = sessions
        .get_mut(&req.session_id)
        .ok_or_else(|| ApiError::not_found(format!("no session `{}`", req.session_id)))?;
    if s.consumed {
        return Err(ApiError::stale("session was already finalized"));
    }
    s.state = p.taxonomy.answer(s.state.clone(), req.response)?;
    Ok(Json(view(&p, req.session_id, s)))
}

async fn session_get(
    State(reg): State<AppState>,
    Path((id, session_id)): Path<(String, Uuid)>,
) -> ApiResult<Json<SessionView>> {
    let handle = reg.get(&id)?;
    let p = handle.snapshot();
    let sessions = handle.sessions.lock();
    let s = sessions
        .get(&session_id)
        .ok_or_else(|| ApiError::not_found(format!("no session `{session_id}`")))?;
    Ok(Json(view(&p, session_id, s)))
}

#[derive(Debug, Deserialize)]
struct FinalizeSession {
    session_id: Uuid,
}

async fn session_finalize(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Annotation>)> {
    let req: FinalizeSession = parse_body(&body)?;
    let handle = reg.get(&id)?;
    let mut sessions = handle.sessions.lock();
    let s = sessions
        .get_mut(&req.session_id)
        .ok_or_else(|| ApiError::not_found(format!("no session `{}`", req.session_id)))?;
    if s.consumed {
        return Err(ApiError::stale("session was already finalized"));
    }
    let base = s.base_revision;
    let annotation = finalize(&s.state)?.with_revision(base + 1);
    let stored = handle.mutate(|p| {
        let current = p.current_revision(&annotation.key());
        if current != base {
            return Err(ApiError::stale(format!(
                "item changed since the session started (revision {base} -> {current})"
            ))
            .with_details(json!({ "base_revision": base, "current": current })));
        }
        p.append_annotation(annotation.clone())?;
        Ok(annotation)
    })?;
    s.consumed = true;
    Ok((StatusCode::CREATED, Json(stored)))
}

// ---------------------------------------------------------------------------
// annotations

#[derive(Debug, Deserialize)]
struct SubmitAnnotation {
    annotator_id: AnnotatorId,
    segment_id: SegmentId,
    system_id: SystemId,
    #[serde(default)]
    severities: Severities,
    #[serde(default)]
    adp_applicable: Option<bool>,
    #[serde(default)]
    revision: Option<u64>,
}

async fn post_annotation(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Annotation>)> {
    let req: SubmitAnnotation = parse_body(&body)?;
    let stored = reg.get(&id)?.mutate(|p| {
        let mut a = Annotation::new(req.annotator_id, req.segment_id, req.system_id, req.severities);
        if let Some(applicable) = req.adp_applicable {
            a.adp_applicable = applicable;
        }
        let next = p.current_revision(&a.key()) + 1;
        let a = a.with_revision(req.revision.unwrap_or(next));
        p.append_annotation(a.clone())?;
        Ok(a)
    })?;
    Ok((StatusCode::CREATED, Json(stored)))
}

async fn list_annotations(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<Annotation>>> {
    Ok(Json(reg.get(&id)?.snapshot().annotations.clone()))
}

// ---------------------------------------------------------------------------
// progress and reports

#[derive(Debug, Serialize)]
struct AnnotatorProgress {
    annotator_id: AnnotatorId,
    completed: usize,
    total: usize,
    percent: f64,
}

#[derive(Debug, Serialize)]
struct Progress {
    items: usize,
    annotators: Vec<AnnotatorProgress>,
}

async fn progress(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Progress>> {
    let p = reg.get(&id)?.snapshot();
    let auth = p.authoritative_annotations()?;
    let items = p.outputs.len();
    let annotators = p
        .annotators
        .iter()
        .map(|a| {
            let completed = p
                .outputs
                .iter()
                .filter(|o| {
                    auth.contains_key(&AnnotationKey {
                        annotator_id: a.clone(),
                        segment_id: o.segment_id.clone(),
                        system_id: o.system_id.clone(),
                    })
                })
                .count();
            let percent = if items == 0 {
                0.0
            } else {
                completed as f64 * 100.0 / items as f64
            };
            AnnotatorProgress {
                annotator_id: a.clone(),
                completed,
                total: items,
                percent,
            }
        })
        .collect();
    Ok(Json(Progress { items, annotators }))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    #[serde(default)]
    format: Option<String>,
}

/// Structured documents by default; `?format=text|delimited` for the others.
async fn report(
    State(reg): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let kind: ReportKind = kind.parse().map_err(|e: String| ApiError::not_found(e))?;
    let format: OutputFormat = match q.format.as_deref() {
        None => OutputFormat::Structured,
        Some(f) => f.parse().map_err(|e: String| ApiError::bad_request(e))?,
    };
    let p = reg.get(&id)?.snapshot();
    let body = render_report(&p, &p.config, kind, format)?;
    let ctype = match format {
        OutputFormat::Text => "text/plain; charset=utf-8",
        OutputFormat::Delimited => "text/csv; charset=utf-8",
        OutputFormat::Structured => "application/json",
    };
    Ok(([(header::CONTENT_TYPE, ctype)], body).into_response())
}
