use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use thiserror::Error;

use crate::api::ErrorBody;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("session {0} not found")]
    NotFound(String),

    #[error("{message}")]
    Conflict { message: String, details: Value },

    #[error("{message}")]
    Validation { message: String, details: Value },

    #[error("malformed request body: {0}")]
    BadRequest(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError::Conflict {
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ApiError::Validation {
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict { .. } => "conflict",
            ApiError::Validation { .. } => "validation_failed",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let details = match self {
            ApiError::Conflict { details, .. } | ApiError::Validation { details, .. } => details.clone(),
            _ => Value::Null,
        };
        ErrorBody {
            code: self.code().into(),
            message: self.to_string(),
            details,
        }
    }
}

impl From<interank_core::Error> for ApiError {
    fn from(e: interank_core::Error) -> Self {
        use interank_core::Error as E;
        match e {
            E::InvalidPool(report) => ApiError::Validation {
                message: format!("invalid pool: {report}"),
                details: json!({ "issues": report.issues }),
            },
            E::Io { .. } | E::NonConvergence { .. } | E::NotPositiveDefinite { .. } => ApiError::Internal(e.to_string()),
            other => ApiError::validation(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
