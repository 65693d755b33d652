//! JSON API under `/api/v1/`. Request and response shapes are listed in
//! `docs/http-api.md`.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use coauthor_core::compressor::CompressedReport;
use coauthor_core::generator::SectionDraft;
use coauthor_core::linker::{LinkHit, LinkSet};
use coauthor_core::metrics::CorrectionStats;
use coauthor_core::store::{Chapter, ChapterId, ChapterRole, OutlineFormat, Project, ProjectId};

use crate::app::{App, DraftSummary, EvaluateSummary, ReferenceSummary};
use crate::error::AppError;
use crate::jobs::{Job, JobManager, JobRequest};

#[derive(Clone)]
pub struct ApiState {
    pub jobs: Arc<JobManager>,
}

impl ApiState {
    fn app(&self) -> Arc<App> {
        self.jobs.app().clone()
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Debug, Serialize)]
struct ErrorDetail {
    kind: &'static str,
    message: String,
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody { error: ErrorDetail { kind: self.kind(), message: self.to_string() } };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, AppError>;

/// Runs store and provider work off the async executor.
async fn blocking<T: Send + 'static>(
    state: &ApiState,
    f: impl FnOnce(&App) -> Result<T, AppError> + Send + 'static,
) -> ApiResult<T> {
    let app = state.app();
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| AppError::Validation(format!("request aborted: {e}")))?
        .map(Json)
}

pub fn router(state: ApiState) -> Router {
    let chapter = "/api/v1/projects/{pid}/chapters/{cid}";
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/projects", get(list_projects).post(create_project))
        .route("/api/v1/projects/{pid}", get(get_project))
        .route("/api/v1/projects/{pid}/chapters", post(create_chapter))
        .route(chapter, get(get_chapter))
        .route(&format!("{chapter}/outline"), put(put_outline))
        .route(&format!("{chapter}/finalize"), post(finalize))
        .route(&format!("{chapter}/references"), get(list_references).post(add_reference))
        .route(&format!("{chapter}/reports"), get(list_reports))
        .route(&format!("{chapter}/jobs"), get(chapter_jobs).post(submit_job))
        .route(&format!("{chapter}/drafts"), get(list_drafts).post(save_draft))
        .route(&format!("{chapter}/drafts/{{rev}}"), get(get_draft))
        .route(&format!("{chapter}/drafts/{{rev}}/correction"), get(draft_correction))
        .route(&format!("{chapter}/correction-preview"), post(correction_preview))
        .route(&format!("{chapter}/links/{{rev}}"), get(get_links))
        .route(&format!("{chapter}/trace"), post(trace))
        .route(&format!("{chapter}/metrics"), get(list_metrics))
        .route("/api/v1/jobs", get(all_jobs))
        .route("/api/v1/jobs/{id}", get(get_job))
        .fallback(|| async { AppError::NotFound("no such endpoint".into()) })
        .with_state(state)
}

/// Binds `bind` and serves from a background thread; returns the bound address.
pub fn spawn(state: ApiState, bind: &str) -> Result<std::net::SocketAddr, AppError> {
    let io = |source| AppError::Io { path: bind.into(), source };
    let listener = std::net::TcpListener::bind(bind).map_err(io)?;
    listener.set_nonblocking(true).map_err(io)?;
    let addr = listener.local_addr().map_err(io)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(io)?;
    std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers with the runtime");
            let _ = axum::serve(listener, router(state)).await;
        })
    });
    Ok(addr)
}

/// Serves until Ctrl-C.
pub async fn serve(state: ApiState, bind: &str) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|source| AppError::Io { path: bind.into(), source })?;
    eprintln!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| AppError::Io { path: bind.into(), source })
}

type ChapterPath = Path<(String, String)>;

fn ids((pid, cid): (String, String)) -> (ProjectId, ChapterId) {
    (ProjectId(pid), ChapterId(cid))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn list_projects(State(s): State<ApiState>) -> ApiResult<Vec<Project>> {
    blocking(&s, |app| Ok(app.store().list_projects()?)).await
}

#[derive(Debug, Deserialize)]
struct NewProject {
    title: String,
}

async fn create_project(State(s): State<ApiState>, Json(body): Json<NewProject>) -> Result<(StatusCode, Json<Project>), AppError> {
    let project = blocking(&s, move |app| app.create_project(&body.title)).await?;
    Ok((StatusCode::CREATED, project))
}

#[derive(Debug, Serialize)]
struct ProjectView {
    #[serde(flatten)]
    project: Project,
    chapter_details: Vec<Chapter>,
}

async fn get_project(State(s): State<ApiState>, Path(pid): Path<String>) -> ApiResult<ProjectView> {
    blocking(&s, move |app| {
        let pid = ProjectId(pid);
        Ok(ProjectView { project: app.store().load_project(&pid)?, chapter_details: app.store().list_chapters(&pid)? })
    })
    .await
}

#[derive(Debug, Deserialize)]
struct NewChapter {
    title: String,
    #[serde(default)]
    role: ChapterRole,
    #[serde(default)]
    outline: String,
    #[serde(default)]
    outline_format: Option<OutlineFormat>,
}

async fn create_chapter(
    State(s): State<ApiState>,
    Path(pid): Path<String>,
    Json(body): Json<NewChapter>,
) -> Result<(StatusCode, Json<Chapter>), AppError> {
    let chapter = blocking(&s, move |app| {
        app.create_chapter(&ProjectId(pid), &body.title, body.role, &body.outline, body.outline_format)
    })
    .await?;
    Ok((StatusCode::CREATED, chapter))
}

async fn get_chapter(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Chapter> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| Ok(app.store().load_chapter(&pid, &cid)?)).await
}

#[derive(Debug, Deserialize)]
struct OutlineBody {
    outline: String,
    #[serde(default)]
    format: Option<OutlineFormat>,
}

async fn put_outline(State(s): State<ApiState>, Path(p): ChapterPath, Json(body): Json<OutlineBody>) -> ApiResult<Chapter> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.set_outline(&pid, &cid, &body.outline, body.format)).await
}

async fn finalize(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Chapter> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.finalize(&pid, &cid)).await
}

async fn list_references(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Vec<ReferenceSummary>> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| Ok(app.store().load_references(&pid, &cid)?.iter().map(ReferenceSummary::from).collect()))
        .await
}

#[derive(Debug, Deserialize)]
struct NewReference {
    #[serde(default)]
    title: Option<String>,
    body_markdown: String,
}

async fn add_reference(
    State(s): State<ApiState>,
    Path(p): ChapterPath,
    Json(body): Json<NewReference>,
) -> Result<(StatusCode, Json<ReferenceSummary>), AppError> {
    let (pid, cid) = ids(p);
    let doc = blocking(&s, move |app| {
        let doc = app.add_reference_text(&pid, &cid, body.title.as_deref(), body.body_markdown)?;
        Ok(ReferenceSummary::from(&doc))
    })
    .await?;
    Ok((StatusCode::CREATED, doc))
}

async fn list_reports(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Vec<CompressedReport>> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.reports(&pid, &cid)).await
}

async fn submit_job(
    State(s): State<ApiState>,
    Path(p): ChapterPath,
    Json(req): Json<JobRequest>,
) -> Result<(StatusCode, Json<Job>), AppError> {
    let (pid, cid) = ids(p);
    let jobs = s.jobs.clone();
    let job = tokio::task::spawn_blocking(move || jobs.submit(&pid, &cid, req))
        .await
        .map_err(|e| AppError::Validation(format!("request aborted: {e}")))??;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn chapter_jobs(State(s): State<ApiState>, Path(p): ChapterPath) -> Json<Vec<Job>> {
    let (pid, cid) = ids(p);
    Json(s.jobs.list(Some((&pid, &cid))))
}

async fn all_jobs(State(s): State<ApiState>) -> Json<Vec<Job>> {
    Json(s.jobs.list(None))
}

async fn get_job(State(s): State<ApiState>, Path(id): Path<String>) -> ApiResult<Job> {
    s.jobs.get(&id).map(Json)
}

async fn list_drafts(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Vec<DraftSummary>> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.drafts(&pid, &cid)).await
}

/// A revision number or `latest`.
fn revision(rev: &str) -> Result<Option<usize>, AppError> {
    match rev {
        "latest" => Ok(None),
        n => n.parse().map(Some).map_err(|_| AppError::Validation(format!("bad revision {n:?}"))),
    }
}

#[derive(Debug, Serialize)]
struct DraftView {
    revision: usize,
    #[serde(flatten)]
    draft: SectionDraft,
}

async fn get_draft(State(s): State<ApiState>, Path((pid, cid, rev)): Path<(String, String, String)>) -> ApiResult<DraftView> {
    let (pid, cid) = ids((pid, cid));
    blocking(&s, move |app| {
        let (revision, draft) = app.draft(&pid, &cid, revision(&rev)?)?;
        Ok(DraftView { revision, draft })
    })
    .await
}

#[derive(Debug, Deserialize)]
struct DraftText {
    text_markdown: String,
}

#[derive(Debug, Serialize)]
struct SavedDraft {
    revision: usize,
    /// Against revision 0; null when the rate is undefined.
    correction: Option<CorrectionStats>,
}

async fn save_draft(
    State(s): State<ApiState>,
    Path(p): ChapterPath,
    Json(body): Json<DraftText>,
) -> Result<(StatusCode, Json<SavedDraft>), AppError> {
    let (pid, cid) = ids(p);
    let saved = blocking(&s, move |app| {
        let correction = app.correction(&pid, &cid, &body.text_markdown).ok();
        let revision = app.edit_draft(&pid, &cid, body.text_markdown)?;
        Ok(SavedDraft { revision, correction })
    })
    .await?;
    Ok((StatusCode::CREATED, saved))
}

async fn draft_correction(
    State(s): State<ApiState>,
    Path((pid, cid, rev)): Path<(String, String, String)>,
) -> ApiResult<CorrectionStats> {
    let (pid, cid) = ids((pid, cid));
    blocking(&s, move |app| {
        let (_, draft) = app.draft(&pid, &cid, revision(&rev)?)?;
        app.correction(&pid, &cid, &draft.text_markdown)
    })
    .await
}

async fn correction_preview(
    State(s): State<ApiState>,
    Path(p): ChapterPath,
    Json(body): Json<DraftText>,
) -> ApiResult<CorrectionStats> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.correction(&pid, &cid, &body.text_markdown)).await
}

#[derive(Debug, Deserialize)]
struct ThresholdQuery {
    threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DocumentRef {
    id: String,
    idx: u32,
    title: String,
}

#[derive(Debug, Serialize)]
struct LinksView {
    #[serde(flatten)]
    links: LinkSet,
    documents: Vec<DocumentRef>,
}

async fn get_links(
    State(s): State<ApiState>,
    Path((pid, cid, rev)): Path<(String, String, String)>,
    Query(q): Query<ThresholdQuery>,
) -> ApiResult<LinksView> {
    let (pid, cid) = ids((pid, cid));
    blocking(&s, move |app| {
        let rev = match revision(&rev)? {
            Some(r) => r,
            None => app.draft(&pid, &cid, None)?.0,
        };
        let links = app.links(&pid, &cid, rev, q.threshold)?;
        let documents = app
            .store()
            .load_references(&pid, &cid)?
            .into_iter()
            .map(|d| DocumentRef { id: d.id.0, idx: d.idx, title: d.title })
            .collect();
        Ok(LinksView { links, documents })
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TraceBody {
    sentence: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn trace(State(s): State<ApiState>, Path(p): ChapterPath, Json(body): Json<TraceBody>) -> ApiResult<Vec<LinkHit>> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| {
        let k = body.k.unwrap_or(app.config().linker.top_k);
        app.trace(&pid, &cid, &body.sentence, k)
    })
    .await
}

async fn list_metrics(State(s): State<ApiState>, Path(p): ChapterPath) -> ApiResult<Vec<EvaluateSummary>> {
    let (pid, cid) = ids(p);
    blocking(&s, move |app| app.metric_reports(&pid, &cid)).await
}
