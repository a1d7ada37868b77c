use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{SecondsFormat, Utc};
use serde_json::json;

use crate::store::{Store, StoreError, Submission};

/// Trusted identity header set by the mask.
pub const RATER_HEADER: &str = "x-rater-id";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::UnknownRecording(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidLabel(_) | StoreError::InvalidPass(_) | StoreError::EmptyRater => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn rater(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(RATER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

fn require_rater(headers: &HeaderMap) -> Result<&str, ApiError> {
    rater(headers).ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, format!("missing {RATER_HEADER} header")))
}

/// Exports hold every rater's labels, so a rater identity may not read them.
fn refuse_raters(headers: &HeaderMap) -> Result<(), ApiError> {
    match rater(headers) {
        Some(r) => Err(ApiError::new(
            StatusCode::FORBIDDEN,
            format!("exports are not available to raters (got {RATER_HEADER}: {r})"),
        )),
        None => Ok(()),
    }
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/recordings", get(list_recordings))
        .route("/recordings/{id}/audio", get(audio))
        .route("/assessments", post(submit))
        .route("/export/label-matrix", get(export_label_matrix))
        .route("/export/audit", get(export_audit))
        .with_state(store)
}

async fn list_recordings(State(store): State<Arc<Store>>, headers: HeaderMap) -> Result<Response, ApiError> {
    let rater = require_rater(&headers)?;
    Ok(Json(store.recordings_for(rater)).into_response())
}

async fn audio(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = store.audio(&id)?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn submit(
    State(store): State<Arc<Store>>,
    headers: HeaderMap,
    Json(sub): Json<Submission>,
) -> Result<Response, ApiError> {
    if let Some(r) = rater(&headers) {
        if r != sub.rater_id {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                format!("{RATER_HEADER} `{r}` cannot submit for rater `{}`", sub.rater_id),
            ));
        }
    }
    let now = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let stored = store.submit(sub, now)?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn export_label_matrix(State(store): State<Arc<Store>>, headers: HeaderMap) -> Result<Response, ApiError> {
    refuse_raters(&headers)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], store.export_csv()).into_response())
}

async fn export_audit(State(store): State<Arc<Store>>, headers: HeaderMap) -> Result<Response, ApiError> {
    refuse_raters(&headers)?;
    Ok(Json(store.audit()).into_response())
}
