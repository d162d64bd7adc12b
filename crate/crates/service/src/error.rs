use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

/// Request-level failures, each mapped to one HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown market `{0}`")]
    UnknownMarket(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("{0}")]
    Conflict(String),
    /// Details go to the server log only; the client sees the id.
    #[error("internal error {id}")]
    Internal { id: Uuid },
}

impl ServiceError {
    /// Logs `cause` under a fresh id and returns the opaque error.
    pub fn internal(cause: impl std::fmt::Display) -> Self {
        let id = Uuid::new_v4();
        tracing::error!(%id, "{cause}");
        ServiceError::Internal { id }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownMarket(_) => StatusCode::NOT_FOUND,
            ServiceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownMarket(_) => "not_found",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Internal { .. } => "internal",
        }
    }
}

/// `{"error": {"code": ..., "message": ..., "id"?: ...}}`
#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Debug, Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<Uuid>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let id = match &self {
            ServiceError::Internal { id } => Some(*id),
            _ => None,
        };
        let body = ErrorBody { error: ErrorDetail { code: self.code(), message: self.to_string(), id } };
        (self.status(), Json(body)).into_response()
    }
}
