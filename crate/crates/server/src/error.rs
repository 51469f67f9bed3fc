use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use uuis_core::Error;

/// Wire form of every failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

/// Status for a domain error. Keyed on the variant only, so one error class
/// always lands on one status.
pub fn status_of(e: &Error) -> StatusCode {
    use Error::*;
    match e {
        UnknownSession | BadCredentials | ExpiredPending => StatusCode::UNAUTHORIZED,
        Forbidden(_) => StatusCode::FORBIDDEN,
        NotFound { .. } => StatusCode::NOT_FOUND,
        Conflict { .. }
        | UniqueViolation { .. }
        | DuplicateBarCode
        | DuplicateName
        | Duplicate
        | AlreadyMember
        | AlreadyAssigned
        | AlreadyInstalled
        | NoSeatsRemaining
        | CapacityExceeded
        | AlreadyClosed
        | NotPending => StatusCode::CONFLICT,
        Io(_) | UnknownEntityKind(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

/// HTML escaping for anything that may carry client input. Safe for element
/// content and double-quoted attributes; apostrophes stay literal so the
/// fixed messages read as written.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: status_of(&e),
            code: e.code(),
            message: escape(&e.to_string()),
            field: e.field().map(escape),
            position: e.position(),
        }
    }
}

impl ApiError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::ValidationFailed {
            field: field.to_string(),
            reason: reason.into(),
        }
        .into()
    }

    pub fn route_not_found() -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "NO_SUCH_ROUTE",
            message: "no such route".into(),
            field: None,
            position: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
