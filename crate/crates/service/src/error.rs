use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use langgame_core::dialogue::{DialogueError, Stage};
use serde::Serialize;

/// Error body shared by every endpoint: `{"error": {...}}`.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code, message: message.into(), stage: None, id: None } }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        let mut e = ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("{what} '{id}' not found"));
        e.body.id = Some(id.to_string());
        e
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn from_dialogue(e: DialogueError) -> Self {
        let stage = |s: Stage| Some(s.to_string());
        match &e {
            DialogueError::Llm { stage: s, .. } => {
                let mut out = ApiError::new(StatusCode::BAD_GATEWAY, "stage_failed", e.to_string());
                out.body.stage = stage(*s);
                out
            }
            DialogueError::Protocol { stage: s, .. } => {
                let mut out = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "stage_failed", e.to_string());
                out.body.stage = stage(*s);
                out
            }
            DialogueError::NoAgent { env_name } => {
                let mut out = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_agent", e.to_string());
                out.body.id = Some(env_name.clone());
                out
            }
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Wrapper {
            error: ErrorBody,
        }
        (self.status, Json(Wrapper { error: self.body })).into_response()
    }
}
