use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use siteselect_core::analysis::AnalysisError;
use siteselect_core::urp::{Conflict, EngineError, UrpError};

use crate::VERSION_HEADER;

/// An error response: status, message and, for inconsistent profiles, the
/// conflicting criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub conflicts: Vec<Conflict>,
    pub(crate) version: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    snapshot_version: Option<&'a str>,
    error: &'a str,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    conflicts: &'a [Conflict],
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            conflicts: Vec::new(),
            version: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub(crate) fn with_version(mut self, version: &str) -> Self {
        self.version = Some(version.to_owned());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            snapshot_version: self.version.as_deref(),
            error: &self.message,
            conflicts: &self.conflicts,
        };
        let mut resp = (self.status, Json(body)).into_response();
        if let Some(v) = self.version.as_deref().and_then(|v| HeaderValue::from_str(v).ok()) {
            resp.headers_mut().insert(VERSION_HEADER, v);
        }
        resp
    }
}

impl From<UrpError> for ApiError {
    fn from(e: UrpError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::InconsistentProfile(conflicts) => ApiError {
                conflicts,
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
            },
            EngineError::UnknownFocus(_) | EngineError::UnknownSite(_) => ApiError::not_found(message),
            EngineError::UnknownFactor(_) | EngineError::UnknownLevel(_) | EngineError::EmptyFocus => {
                ApiError::bad_request(message)
            }
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Engine(e) => e.into(),
            AnalysisError::UnknownSite(_) | AnalysisError::UnknownChain(_) | AnalysisError::UnknownFactor(_) => {
                ApiError::not_found(e.to_string())
            }
            AnalysisError::EmptyGroup(_) | AnalysisError::Stats(_) | AnalysisError::EmptyStoreSet(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}
