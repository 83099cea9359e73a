use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use debriefkit_core::annotation::AnnotationError;
use debriefkit_core::ingest::IngestError;
use debriefkit_core::interactions::InteractionError;
use debriefkit_core::model::ModelError;
use debriefkit_core::share::ShareError;
use debriefkit_core::AnalyticsError;

/// JSON error body: `{"error": <code>, "message": <text>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

const UNPROCESSABLE: StatusCode = StatusCode::UNPROCESSABLE_ENTITY;

pub fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::InvalidWindow { .. } => "InvalidWindow",
        ModelError::WindowOutOfRange { .. } => "InvalidWindow",
        ModelError::PhaseUnset(_) => "PhaseUnset",
        ModelError::TimelineOrder(_) => "OutOfOrder",
        ModelError::InvalidLayout(_) => "InvalidLayout",
        ModelError::UnknownRole(_) => "UnknownRole",
        ModelError::UnknownCode(_) => "UnknownCode",
        ModelError::UnknownPhase(_) => "UnknownPhase",
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::PhaseUnset(_) | ModelError::TimelineOrder(_) => StatusCode::CONFLICT,
            ModelError::UnknownPhase(_) | ModelError::UnknownRole(_) => StatusCode::BAD_REQUEST,
            _ => UNPROCESSABLE,
        };
        ApiError::new(status, model_code(&e), e.to_string())
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let (status, code) = match &e {
            AnnotationError::OutOfOrder(_) => (StatusCode::CONFLICT, "OutOfOrder"),
            AnnotationError::UnknownAction(_) => (UNPROCESSABLE, "UnknownAction"),
            AnnotationError::DuplicateAction(_) => (UNPROCESSABLE, "DuplicateAction"),
            AnnotationError::NotTaggable(_) => (UNPROCESSABLE, "NotTaggable"),
            AnnotationError::OutOfRange { .. } => (UNPROCESSABLE, "OutOfRange"),
            AnnotationError::Parse { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "CorruptLog"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let (status, code) = match e {
            IngestError::Model(m) => return m.into(),
            IngestError::Annotation(a) => return a.into(),
            IngestError::Format { .. } => (StatusCode::BAD_REQUEST, "FormatError"),
            IngestError::NonMonotonic { .. } => (StatusCode::BAD_REQUEST, "NonMonotonic"),
            IngestError::EmptyAudio => (StatusCode::BAD_REQUEST, "EmptyAudio"),
            IngestError::UnsupportedAudio(_) => (StatusCode::BAD_REQUEST, "UnsupportedAudio"),
            IngestError::InvalidSegment { .. } => (StatusCode::BAD_REQUEST, "InvalidSegment"),
            IngestError::AlreadySealed(_) => (StatusCode::CONFLICT, "AlreadySealed"),
            IngestError::NotSealed(_) => (StatusCode::CONFLICT, "NotSealed"),
            IngestError::AlreadyExists(_) => (StatusCode::CONFLICT, "AlreadyExists"),
            IngestError::InvalidSessionId(_) => (StatusCode::BAD_REQUEST, "InvalidSessionId"),
            IngestError::Coder(_) => (UNPROCESSABLE, "CoderError"),
            IngestError::Io { .. } | IngestError::Json { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "StorageError")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Model(m) => m.into(),
            AnalyticsError::UnknownViz(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownViz", e.to_string()),
            AnalyticsError::WindowSize(_) | AnalyticsError::InvalidParams(_) => {
                ApiError::new(UNPROCESSABLE, "InvalidParams", e.to_string())
            }
        }
    }
}

pub fn share_code(e: &ShareError) -> &'static str {
    match e {
        ShareError::TooManyItems(_) => "TooManyItems",
        ShareError::NoItems => "NoItems",
        ShareError::UnknownViz(_) => "UnknownViz",
        ShareError::InvalidWindow { .. } => "InvalidWindow",
    }
}

impl From<ShareError> for ApiError {
    fn from(e: ShareError) -> Self {
        ApiError::new(UNPROCESSABLE, share_code(&e), e.to_string())
    }
}

impl From<InteractionError> for ApiError {
    fn from(e: InteractionError) -> Self {
        match e {
            InteractionError::SessionClosed => ApiError::new(StatusCode::CONFLICT, "SessionClosed", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageError", e.to_string()),
        }
    }
}
