//! HTTP API. Every response body is canonical JSON; failures carry
//! `{"error": {"code": ..., "message": ...}}`.

use std::collections::HashMap;
use std::path::{Component, Path as FsPath};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use serde_json::{json, Value};
use slicebench::canonical;
use slicebench::report::diff;
use slicebench::testbench::TestBench;
use slicebench::Error as CoreError;
use tokio::net::TcpListener;

use crate::build::{run_builder, BuildRequest};
use crate::error::ServiceError;
use crate::evaluate::{evaluate, EvaluateRequest, PredictionSource};
use crate::jobs::{JobKind, JobStatus, JobStore};
use crate::workspace::{check_id, Workspace};

#[derive(Clone)]
pub struct AppState {
    pub ws: Workspace,
    pub jobs: JobStore,
}

impl AppState {
    pub fn open(ws: Workspace) -> Result<Self, ServiceError> {
        let jobs = JobStore::open(ws.jobs_log())?;
        Ok(AppState { ws, jobs })
    }
}

fn canonical_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical::to_vec_from(value) {
        Ok(body) => canonical_response(status, body),
        Err(e) => ServiceError::Task(e.to_string()).into_response(),
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Core(e) => match e {
                CoreError::Io(_) | CoreError::CacheRead { .. } | CoreError::CacheWrite { .. } | CoreError::Integrity { .. } => {
                    StatusCode::INTERNAL_SERVER_ERROR
                }
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
            ServiceError::Remote(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Io { .. } | ServiceError::Task(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn payload(&self) -> Value {
        json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = canonical::to_vec(&self.payload());
        canonical_response(self.status(), body)
    }
}

type ApiResult = Result<Response, ServiceError>;

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

fn bench_summary(b: &TestBench) -> Value {
    json!({
        "id": b.identifier.canonical(),
        "version": b.version,
        "task": b.task,
        "created_at": b.created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        "n_slices": b.slices.len(),
    })
}

fn bench_detail(b: &TestBench) -> Value {
    let mut v = bench_summary(b);
    let slices: Vec<Value> = b
        .slices
        .iter()
        .map(|s| {
            json!({
                "display_name": s.display_name,
                "category": s.category,
                "size": s.len(),
                "lineage": s.lineage,
            })
        })
        .collect();
    v["slices"] = Value::Array(slices);
    v
}

async fn list_benches(State(st): State<AppState>) -> ApiResult {
    let ws = st.ws.clone();
    let benches = tokio::task::spawn_blocking(move || ws.list_benches())
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))??;
    let list: Vec<Value> = benches.iter().map(bench_summary).collect();
    Ok(json_response(StatusCode::OK, &list))
}

async fn get_bench(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let ws = st.ws.clone();
    let bench = tokio::task::spawn_blocking(move || ws.load_bench(&id))
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))??;
    Ok(json_response(StatusCode::OK, &bench_detail(&bench)))
}

fn accepted(job_id: &str) -> Response {
    json_response(StatusCode::ACCEPTED, &json!({ "job_id": job_id, "status": JobStatus::Queued }))
}

fn finish(jobs: &JobStore, id: &str, outcome: Result<Value, ServiceError>) {
    let res = match outcome {
        Ok(result) => jobs.transition(id, JobStatus::Done, Some(result), None),
        Err(e) => {
            tracing::warn!(job = id, error = %e, "job failed");
            jobs.transition(id, JobStatus::Failed, None, Some(e.to_string()))
        }
    };
    if let Err(e) = res {
        tracing::error!(job = id, error = %e, "could not record job outcome");
    }
}

async fn run_slicebuilder(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let req: BuildRequest = parse_body(&body)?;
    check_id("dataset", &req.dataset)?;
    if let Some(b) = &req.testbench {
        check_id("testbench", b)?;
    }
    let job = st.jobs.create(JobKind::SliceBuild)?;
    let id = job.job_id.clone();
    tokio::spawn(async move {
        let lock = req.testbench.as_deref().map(|b| st.jobs.bench_lock(b));
        let _guard = match &lock {
            Some(l) => Some(l.lock().await),
            None => None,
        };
        if let Err(e) = st.jobs.transition(&id, JobStatus::Running, None, None) {
            tracing::error!(job = %id, error = %e, "could not start job");
            return;
        }
        let ws = st.ws.clone();
        let outcome = match tokio::task::spawn_blocking(move || run_builder(&ws, &req)).await {
            Ok(r) => r.and_then(|o| serde_json::to_value(o).map_err(|e| ServiceError::Task(e.to_string()))),
            Err(e) => Err(ServiceError::Task(e.to_string())),
        };
        finish(&st.jobs, &id, outcome);
    });
    Ok(accepted(&job.job_id))
}

/// File predictions named over HTTP must stay inside the workspace root.
fn confine(ws: &Workspace, path: &FsPath) -> Result<std::path::PathBuf, ServiceError> {
    let ok = !path.as_os_str().is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)));
    if !ok {
        return Err(ServiceError::BadRequest(format!(
            "prediction path `{}` must be relative to the data root",
            path.display()
        )));
    }
    Ok(ws.root().join(path))
}

async fn post_evaluate(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let mut req: EvaluateRequest = parse_body(&body)?;
    check_id("testbench", &req.testbench)?;
    if let PredictionSource::File { path } = &req.predictions {
        req.predictions = PredictionSource::File {
            path: confine(&st.ws, path)?,
        };
    }
    if let PredictionSource::Remote { config } = &req.predictions {
        config.validate()?;
    }
    let job = st.jobs.create(JobKind::Evaluate)?;
    let id = job.job_id.clone();
    tokio::spawn(async move {
        let lock = st.jobs.bench_lock(&req.testbench);
        let _guard = lock.lock().await;
        if let Err(e) = st.jobs.transition(&id, JobStatus::Running, None, None) {
            tracing::error!(job = %id, error = %e, "could not start job");
            return;
        }
        let outcome = evaluate(&st.ws, &req).await.map(|o| json!({ "report_id": o.report_id }));
        finish(&st.jobs, &id, outcome);
    });
    Ok(accepted(&job.job_id))
}

async fn get_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let rec = st.jobs.get(&id).ok_or_else(|| ServiceError::not_found("job", &id))?;
    Ok(json_response(StatusCode::OK, &rec))
}

async fn get_report(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(canonical_response(StatusCode::OK, st.ws.report_bytes(&id)?))
}

async fn get_report_latex(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let report = st.ws.load_report(&id)?;
    Ok(json_response(StatusCode::OK, &json!({ "latex": report.emit_latex() })))
}

async fn get_diff(
    State(st): State<AppState>,
    Path((a, b)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let ra = st.ws.load_report(&a)?;
    let rb = st.ws.load_report(&b)?;
    let metric = match q.get("metric") {
        Some(m) => m.clone(),
        None => ra
            .metric_names()
            .into_iter()
            .next()
            .ok_or_else(|| ServiceError::BadRequest("report has no metrics; pass `metric`".into()))?,
    };
    let threshold = match q.get("threshold") {
        Some(t) => t
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| ServiceError::BadRequest(format!("invalid threshold `{t}`")))?,
        None => 0.0,
    };
    let regressions = diff(&ra, &rb, &metric, threshold)?;
    Ok(json_response(
        StatusCode::OK,
        &json!({ "a": a, "b": b, "metric": metric, "threshold": threshold, "regressions": regressions }),
    ))
}

async fn fallback(uri: axum::http::Uri) -> ServiceError {
    ServiceError::not_found("route", uri.path())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/testbenches", get(list_benches))
        .route("/api/testbenches/:id", get(get_bench))
        .route("/api/slicebuilders/run", post(run_slicebuilder))
        .route("/api/evaluate", post(post_evaluate))
        .route("/api/jobs/:id", get(get_job))
        .route("/api/reports/:id", get(get_report))
        .route("/api/reports/:id/latex", get(get_report_latex))
        .route("/api/reports/:a/diff/:b", get(get_diff))
        .fallback(fallback)
        .with_state(state)
}

/// Serves on an already bound listener until the future is dropped.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
