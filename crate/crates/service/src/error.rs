use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use mtqe_core::ingestion::{CorpusError, ProjectFileError, RowRejection, SheetError};
use mtqe_core::model::ModelError;
use mtqe_core::protocol::ProtocolError;
use mtqe_core::reports::ReportError;
use serde_json::{json, Value};

/// Error body: `{"error": kind, "message": ..., "details": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn stale(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "StaleRevision", message)
    }

    pub fn rejected_rows(rows: &[RowRejection]) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "RejectedRows",
            format!("{} row(s) rejected; nothing was imported", rows.len()),
        )
        .with_details(json!({ "rejected": rows }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind, "message": self.message, "details": self.details });
        (self.status, axum::Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let message = e.to_string();
        match e {
            ModelError::InvalidAnnotation(v) => {
                let gating = v.iter().any(|x| x.is_gating());
                let kind = if gating { "GatingViolation" } else { "InvalidAnnotation" };
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, kind, message).with_details(json!({ "violations": v }))
            }
            ModelError::StaleRevision { submitted, current } => {
                ApiError::stale(message).with_details(json!({ "submitted": submitted, "current": current }))
            }
            ModelError::UnknownSegment(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "UnknownSegment", message),
            ModelError::DuplicateSegment(_) | ModelError::DuplicateOutput { .. } => {
                ApiError::new(StatusCode::CONFLICT, "Conflict", message)
            }
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidProject", message),
        }
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        let message = e.to_string();
        match e {
            ProtocolError::GatingViolation(v) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "GatingViolation", message)
                    .with_details(json!({ "violations": v }))
            }
            ProtocolError::SessionIncomplete(node) => {
                ApiError::new(StatusCode::CONFLICT, "SessionIncomplete", message).with_details(json!({ "node": node }))
            }
            ProtocolError::SessionComplete => ApiError::new(StatusCode::CONFLICT, "SessionComplete", message),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ProtocolError", message),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.kind(), e.to_string()).with_details(e.details())
    }
}

impl From<SheetError> for ApiError {
    fn from(e: SheetError) -> Self {
        let details = serde_json::to_value(&e).unwrap_or(Value::Null);
        let (status, kind) = match e {
            SheetError::UnknownSystem(_) => (StatusCode::NOT_FOUND, "UnknownSystem"),
            SheetError::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "UnknownAnnotator"),
            SheetError::BadHeader(_) => (StatusCode::UNPROCESSABLE_ENTITY, "BadHeader"),
            SheetError::EncodingError(_) => (StatusCode::UNPROCESSABLE_ENTITY, "EncodingError"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "SheetError"),
        };
        ApiError::new(status, kind, e.to_string()).with_details(details)
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let row = match &e {
            CorpusError::Row { row, .. } | CorpusError::Model { row, .. } => Some(*row),
            _ => None,
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "CorpusError", e.to_string())
            .with_details(json!({ "row": row }))
    }
}

impl From<ProjectFileError> for ApiError {
    fn from(e: ProjectFileError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Persistence", e.to_string())
    }
}
