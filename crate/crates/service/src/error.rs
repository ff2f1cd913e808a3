use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

use novelty_core::io::{DecodeError, OutputError};
use novelty_core::pipeline::ConfigError;
use novelty_core::PipelineError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{session}` has no result {index}")]
    UnknownResult { session: String, index: usize },
    #[error("no such file `{0}`")]
    UnknownFile(String),
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("malformed config body: {0}")]
    MalformedConfig(String),
    #[error("cannot decode upload: {0}")]
    Decode(#[from] DecodeError),
    #[error("upload exceeds {limit} bytes")]
    PayloadTooLarge { limit: usize },
    #[error("processing failed: {0}")]
    Processing(#[from] PipelineError),
    #[error("storage failure: {0}")]
    Storage(#[from] OutputError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl ApiError {
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "unknown-session",
            ApiError::UnknownResult { .. } => "unknown-result",
            ApiError::UnknownFile(_) => "unknown-file",
            ApiError::InvalidConfig(_) | ApiError::MalformedConfig(_) => "invalid-config",
            ApiError::Decode(_) => "decode-failure",
            ApiError::PayloadTooLarge { .. } => "payload-too-large",
            ApiError::Processing(_) => "processing-failure",
            ApiError::Storage(_) => "storage-failure",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_)
            | ApiError::UnknownResult { .. }
            | ApiError::UnknownFile(_) => StatusCode::NOT_FOUND,
            ApiError::InvalidConfig(_) | ApiError::MalformedConfig(_) | ApiError::Decode(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::PayloadTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Processing(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Storage(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        let field = match &self {
            ApiError::InvalidConfig(e) => Some(e.field),
            _ => None,
        };
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
            field,
        };
        (status, Json(body)).into_response()
    }
}
