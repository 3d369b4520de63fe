use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use opented_core::filter::{ParseError, ValidationError};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ValidationError>,
}

/// Every failure leaves the service as `{"error": {code, message, path?, errors?}}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                path: None,
                errors: Vec::new(),
            },
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn at(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }

    pub fn too_large(message: impl Into<String>) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "filter_too_large", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn invalid_filter(errors: Vec<ValidationError>) -> Self {
        let message = match errors.as_slice() {
            [one] => one.to_string(),
            many => format!("{} validation errors", many.len()),
        };
        let mut e = Self::bad_request("invalid_filter", message);
        e.body.errors = errors;
        e
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        let path = e.path().map(str::to_string);
        let mut err = ApiError::bad_request(e.code(), e.to_string());
        err.body.path = path;
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Envelope {
            error: ErrorBody,
        }
        (self.status, Json(Envelope { error: self.body })).into_response()
    }
}
