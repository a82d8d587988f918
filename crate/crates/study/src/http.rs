//! JSON-over-HTTP front of a [`Service`].
//!
//! Errors are `{"code", "message"}` bodies. Service calls may retrain
//! models or sync files, so they run on the blocking pool.

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::analysis::{analyze_export, AnalysisParams};
use crate::config::StudyConfig;
use crate::error::StudyError;
use crate::service::Service;
use crate::store::StoreError;
use crate::study::QuestionnaireResponse;

pub struct ApiError(pub StudyError);

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &StudyError) -> StatusCode {
    match e {
        StudyError::InvalidConfig(_)
        | StudyError::BadRequest(_)
        | StudyError::BadElapsed
        | StudyError::UnknownChoice(_)
        | StudyError::MalformedExport(_) => StatusCode::BAD_REQUEST,
        StudyError::ConsentRequired => StatusCode::FORBIDDEN,
        StudyError::UnknownStudy(_) | StudyError::UnknownSession(_) | StudyError::UnknownKey => StatusCode::NOT_FOUND,
        StudyError::StudyExists(_)
        | StudyError::DuplicateKey
        | StudyError::SessionComplete
        | StudyError::SessionIncomplete { .. }
        | StudyError::OutOfOrderSubmission { .. } => StatusCode::CONFLICT,
        StudyError::Curriculum(_) | StudyError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.0.code(), "message": self.0.to_string() });
        (status_of(&self.0), Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, StudyError> {
    serde_json::from_slice(body).map_err(|e| StudyError::BadRequest(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StudyError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StudyError::Store(StoreError::Io { path: "<handler>".into(), source: std::io::Error::other(e) })))?
        .map_err(ApiError)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    key: String,
    consent: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBody {
    instance_id: String,
    choice: String,
    /// Kept loose so that zero, negative and fractional values map to
    /// `bad_elapsed` rather than a parse error.
    elapsed_ms: serde_json::Number,
}

async fn create_study(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult {
    let config: StudyConfig = parse(&body)?;
    let study = blocking(move || svc.create_study(config)).await?;
    let body = json!({
        "id": study.id(),
        "session_length": study.session_length(),
        "groups": study.plan().group_names,
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn register(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let b: RegisterBody = parse(&body)?;
    let reg = blocking(move || svc.study(&id)?.register(&b.key, b.consent)).await?;
    Ok((StatusCode::CREATED, Json(reg)).into_response())
}

async fn next(State(svc): State<Arc<Service>>, Path(sid): Path<String>) -> ApiResult {
    let next = blocking(move || svc.study_of_session(&sid)?.next_instance(&sid)).await?;
    Ok(Json(next).into_response())
}

async fn annotate(State(svc): State<Arc<Service>>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let b: AnnotationBody = parse(&body)?;
    let elapsed = b.elapsed_ms.as_i64().ok_or(StudyError::BadElapsed)?;
    let ack = blocking(move || svc.study_of_session(&sid)?.submit_annotation(&sid, &b.instance_id, &b.choice, elapsed)).await?;
    Ok(Json(ack).into_response())
}

async fn questionnaire(State(svc): State<Arc<Service>>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let response: QuestionnaireResponse = parse(&body)?;
    blocking(move || svc.study_of_session(&sid)?.submit_questionnaire(&sid, response)).await?;
    Ok(Json(json!({ "stored": true })).into_response())
}

async fn delete_participant(State(svc): State<Arc<Service>>, Path(key): Path<String>) -> ApiResult {
    let removed = blocking(move || svc.delete_participant(&key)).await?;
    Ok(Json(json!({ "deleted_annotations": removed })).into_response())
}

async fn export(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult {
    let text = blocking(move || Ok(svc.study(&id)?.export())).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

fn number(q: &HashMap<String, String>, name: &str, default: f64) -> Result<f64, StudyError> {
    match q.get(name) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| StudyError::BadRequest(format!("{name} must be a number"))),
    }
}

async fn report(State(svc): State<Arc<Service>>, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let defaults = AnalysisParams::default();
    let params = AnalysisParams {
        cap_k: number(&q, "cap_k", defaults.cap_k)?,
        hard_limit: number(&q, "hard_limit", defaults.hard_limit)?,
    };
    let text = q.get("format").is_some_and(|f| f == "text");
    let report = blocking(move || analyze_export(&svc.study(&id)?.export(), params)).await?;
    if text {
        return Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report.to_text()).into_response());
    }
    Ok(Json(report).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/studies", post(create_study))
        .route("/studies/{id}/register", post(register))
        .route("/studies/{id}/export", get(export))
        .route("/studies/{id}/report", get(report))
        .route("/sessions/{sid}/next", get(next))
        .route("/sessions/{sid}/annotations", post(annotate))
        .route("/sessions/{sid}/questionnaire", post(questionnaire))
        .route("/participants/{key}", delete(delete_participant))
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
