//! HTTP/JSON surface over the inventory service.

pub mod error;
pub mod gate;
mod routes;

use std::sync::Arc;

use axum::extract::{FromRef, FromRequestParts};
use axum::http::header::{AUTHORIZATION, COOKIE};
use axum::http::request::Parts;
use axum::Router;
use serde::de::DeserializeOwned;
use uuis_core::query::{self, FieldSchema, QueryAst};
use uuis_core::session::Session;
use uuis_core::Uuis;

use crate::error::{ApiError, ApiResult};
use crate::gate::Rule;

pub const SESSION_COOKIE: &str = "uuis_session";
pub const PAGE_DEFAULT: usize = 50;
pub const PAGE_MAX: usize = 500;

#[derive(Clone)]
pub struct App {
    pub uuis: Arc<Uuis>,
}

pub fn router(uuis: Arc<Uuis>) -> Router {
    routes::all()
        .fallback(|| async { ApiError::route_not_found() })
        .with_state(App { uuis })
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, uuis: Arc<Uuis>) -> std::io::Result<()> {
    axum::serve(listener, router(uuis))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Session token from the cookie, or from a bearer header for non-browser
/// clients.
pub fn token_of(parts: &Parts) -> Option<String> {
    if let Some(v) = parts.headers.get(AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        if let Some(t) = v.strip_prefix("Bearer ") {
            return Some(t.trim().to_string());
        }
    }
    parts
        .headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string())
}

/// Authenticated caller. Resolving it slides the idle window.
pub struct Caller(pub Session);

impl<S> FromRequestParts<S> for Caller
where
    S: Send + Sync,
    App: FromRef<S>,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> ApiResult<Self> {
        let app = App::from_ref(state);
        let token = token_of(parts).ok_or(uuis_core::Error::UnknownSession)?;
        Ok(Caller(app.uuis.auth.session(&token)?))
    }
}

/// Runs a service call off the async executor.
pub(crate) async fn blocking<T, F>(app: &App, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Uuis) -> uuis_core::Result<T> + Send + 'static,
{
    let u = app.uuis.clone();
    tokio::task::spawn_blocking(move || f(&u))
        .await
        .map_err(|_| ApiError::from(uuis_core::Error::Io("worker panicked".into())))?
        .map_err(ApiError::from)
}

pub(crate) fn typed<T: DeserializeOwned>(v: serde_json::Value) -> ApiResult<T> {
    serde_json::from_value(v).map_err(|e| ApiError::invalid("body", e.to_string()))
}

pub(crate) fn param<'a>(params: &'a [(String, String)], name: &str) -> Option<&'a str> {
    params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

pub(crate) fn int_param(params: &[(String, String)], name: &str) -> ApiResult<Option<i64>> {
    param(params, name)
        .map(|v| v.parse().map_err(|_| ApiError::invalid(name, "must be an integer")))
        .transpose()
}

pub(crate) fn path_id(raw: &str) -> ApiResult<uuis_core::storage::EntityId> {
    gate::check("id", &Rule::DIGITS, raw)?;
    raw.parse()
        .map(uuis_core::storage::EntityId)
        .map_err(|_| ApiError::invalid("id", "must be an integer"))
}

pub(crate) const PAGING: [(&str, Rule); 2] = [("offset", Rule::DIGITS), ("limit", Rule::DIGITS)];

pub(crate) fn paging(params: &[(String, String)]) -> ApiResult<(usize, usize)> {
    let offset = int_param(params, "offset")?.unwrap_or(0);
    let limit = int_param(params, "limit")?.unwrap_or(PAGE_DEFAULT as i64);
    if offset < 0 {
        return Err(ApiError::invalid("offset", "must not be negative"));
    }
    if !(1..=PAGE_MAX as i64).contains(&limit) {
        return Err(ApiError::invalid("limit", format!("must be between 1 and {PAGE_MAX}")));
    }
    Ok((offset as usize, limit as usize))
}

pub(crate) fn dry_run(params: &[(String, String)]) -> bool {
    matches!(param(params, "dry_run"), Some("1" | "true"))
}

/// A search request's query: `q=` text, or one input per field combined as
/// the query helper would. Mixing the two is refused.
pub(crate) fn search_ast(
    params: &[(String, String)],
    schema: &FieldSchema,
    reserved: &[&str],
) -> ApiResult<QueryAst> {
    let fields: std::collections::BTreeMap<String, String> = params
        .iter()
        .filter(|(k, _)| k != "q" && !reserved.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    match param(params, "q") {
        Some(_) if !fields.is_empty() => Err(ApiError::invalid(
            "q",
            "give either q or field inputs, not both",
        )),
        Some(q) => Ok(query::parse(q, schema)?),
        None => Ok(query::build_from_fields(&fields, schema)?),
    }
}

pub(crate) fn field_names(schema: &FieldSchema) -> Vec<&str> {
    schema.fields.iter().map(|f| f.name.as_str()).collect()
}

/// Query-string pairs in order; repeated keys stay repeated.
pub struct Params(pub Vec<(String, String)>);

impl<S: Send + Sync> FromRequestParts<S> for Params {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> ApiResult<Self> {
        axum::extract::Query::<Vec<(String, String)>>::try_from_uri(&parts.uri)
            .map(|q| Params(q.0))
            .map_err(|e| ApiError::invalid("query", e.body_text()))
    }
}

/// Raw session token, for calls that act on the token itself.
pub struct Token(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Token {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> ApiResult<Self> {
        token_of(parts)
            .map(Token)
            .ok_or_else(|| uuis_core::Error::UnknownSession.into())
    }
}
