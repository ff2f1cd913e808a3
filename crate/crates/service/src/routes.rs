use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;
use tower_http::cors::CorsLayer;

use crate::error::ApiError;
use crate::state::AppState;

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload_bytes;
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/images",
            post(upload).layer(DefaultBodyLimit::max(limit)),
        )
        .route("/sessions/{id}/images/{name}", get(original_file))
        .route("/sessions/{id}/results/{k}", get(get_result))
        .route("/sessions/{id}/memory", get(get_memory))
        .route("/sessions/{id}/reset", post(reset))
        .route("/sessions/{id}/summary", get(get_summary))
        .route("/sessions/{id}/config", axum::routing::patch(update_config))
        .route("/sessions/{id}/maps/{name}", get(map_file))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// An empty body means "all defaults".
fn json_object(body: &Bytes) -> Result<Value, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::MalformedConfig(e.to_string()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.create_session(&json_object(&body)?)?;
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn list_sessions(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.list_sessions())
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.session(&id)?))
}

async fn upload(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let body = body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::PayloadTooLarge {
                limit: state.config().max_upload_bytes,
            }
        } else {
            ApiError::Internal(e.body_text())
        }
    })?;
    Ok(Json(state.submit(&id, body.to_vec()).await?))
}

async fn get_result(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, usize)>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.result(&id, k)?))
}

async fn get_memory(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.memory(&id)?.as_ref().clone()))
}

async fn reset(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.reset(&id).await?))
}

async fn get_summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.summary(&id)?))
}

async fn update_config(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.update_config(&id, &json_object(&body)?).await?))
}

async fn serve_png(path: std::path::PathBuf, name: String) -> Result<impl IntoResponse, ApiError> {
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes)),
        Err(_) => Err(ApiError::UnknownFile(name)),
    }
}

async fn map_file(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let path = state.file_path(&id, "maps", &name)?;
    serve_png(path, name).await
}

async fn original_file(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let path = state.file_path(&id, "images", &name)?;
    serve_png(path, name).await
}
