use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use uuis_core::query::{self, FieldSchema};

use crate::error::{ApiError, ApiResult};
use crate::gate::{self, Rule, Shape};
use crate::{field_names, App, Caller, Params};

/// Query-helper support: field lists, helper composition and parsing, so a
/// client can keep its query box in step with per-field inputs.
pub fn routes() -> Router<App> {
    Router::new()
        .route("/query/{entity}/schema", get(schema))
        .route("/query/{entity}/build", get(build))
        .route("/query/{entity}/parse", post(parse))
}

fn schema_of(app: &App, entity: &str) -> ApiResult<FieldSchema> {
    Ok(match entity {
        "assets" => uuis_core::assets::search_schema(),
        "software" => uuis_core::software::search_schema(),
        "requests" => uuis_core::requests::search_schema(),
        "locations" => app.uuis.locations.config().schema(),
        _ => return Err(ApiError::invalid("entity", "one of assets, software, requests, locations")),
    })
}

async fn schema(State(app): State<App>, Caller(_): Caller, Path(entity): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    Ok(Json(schema_of(&app, &entity)?).into_response())
}

async fn build(State(app): State<App>, Caller(_): Caller, Path(entity): Path<String>, Params(q): Params) -> ApiResult<Response> {
    let schema = schema_of(&app, &entity)?;
    gate::query(&q, &[], &field_names(&schema))?;
    let inputs = q.into_iter().collect();
    let ast = query::build_from_fields(&inputs, &schema)?;
    Ok(Json(json!({"q": query::serialize(&ast), "ast": ast})).into_response())
}

const PARSE: Shape = Shape::Object(&[("q", Shape::Scalar(Rule { max: query::MAX_QUERY_LEN, ..Rule::LINE }))]);

async fn parse(State(app): State<App>, Caller(_): Caller, Path(entity): Path<String>, body: Bytes) -> ApiResult<Response> {
    let schema = schema_of(&app, &entity)?;
    let v = gate::body(&body, &PARSE)?;
    let text = v["q"].as_str().unwrap_or_default();
    let ast = query::parse(text, &schema)?;
    Ok(Json(json!({"q": query::serialize(&ast), "ast": ast})).into_response())
}
