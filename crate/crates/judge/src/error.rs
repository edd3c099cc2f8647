use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Core(#[from] qrelkit_core::Error),

    #[error("campaign load failed: {0}")]
    Load(String),

    #[error("missing or unknown token")]
    Unauthorized,

    #[error("forbidden: {0}")]
    Forbidden(String),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{} assigned documents are not judged yet", .0.len())]
    Incomplete(Vec<(String, String, String)>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = JudgeError> = std::result::Result<T, E>;

impl JudgeError {
    pub fn status(&self) -> StatusCode {
        match self {
            JudgeError::Unauthorized => StatusCode::UNAUTHORIZED,
            JudgeError::Forbidden(_) => StatusCode::FORBIDDEN,
            JudgeError::BadRequest(_) => StatusCode::BAD_REQUEST,
            JudgeError::NotFound(_) => StatusCode::NOT_FOUND,
            JudgeError::Incomplete(_) => StatusCode::CONFLICT,
            JudgeError::Core(e) if e.is_validation() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for JudgeError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let JudgeError::Incomplete(missing) = &self {
            body["missing"] = missing
                .iter()
                .map(|(a, t, d)| json!({ "assessor_id": a, "topic_id": t, "doc_id": d }))
                .collect();
        }
        (self.status(), Json(body)).into_response()
    }
}
