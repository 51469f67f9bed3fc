use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use uuis_core::requests::{self, RequestFilter, SpecificDraft};

use crate::error::ApiResult;
use crate::gate::{self, Rule, Shape};
use crate::{blocking, field_names, param, paging, path_id, search_ast, typed, App, Caller, Params, PAGING};

pub fn routes() -> Router<App> {
    Router::new()
        .route("/requests/general", post(submit_general))
        .route("/requests/specific", post(submit_specific))
        .route("/requests", get(search))
        .route("/requests/{id}", get(get_request))
        .route("/requests/{id}/close", post(close))
        .route("/requests/{id}/approve", post(approve))
}

#[derive(Deserialize)]
struct General {
    #[serde(rename = "Category", default)]
    category: String,
    #[serde(rename = "Description", default)]
    description: String,
}

const GENERAL: Shape = Shape::Object(&[("Category", Shape::Named), ("Description", Shape::Named)]);

pub const SPECIFIC: Shape = Shape::Object(&[
    ("Category", Shape::Named),
    ("Description", Shape::Named),
    ("BarCode", Shape::Named),
    ("LocationName", Shape::Named),
    ("GroupID", Shape::Named),
    ("UserName", Shape::Named),
    ("CompartmentNo", Shape::Named),
]);

fn created(id: uuis_core::storage::EntityId) -> Response {
    (
        StatusCode::CREATED,
        Json(json!({"RequestID": id, "message": format!("Request ID {id} was entered")})),
    )
        .into_response()
}

async fn submit_general(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Response> {
    let b: General = typed(gate::body(&body, &GENERAL)?)?;
    let id = blocking(&app, move |u| u.requests.submit_general(&s, &b.category, &b.description)).await?;
    Ok(created(id))
}

async fn submit_specific(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Response> {
    let draft: SpecificDraft = typed(gate::body(&body, &SPECIFIC)?)?;
    let id = blocking(&app, move |u| u.requests.submit_specific(&s, &draft)).await?;
    Ok(created(id))
}

const FILTERS: [&str; 5] = ["status", "category", "originator", "department", "faculty"];

/// Status and category are checkbox sets: repeat the parameter once per
/// ticked box. No status ticked finds nothing; no category ticked finds all.
async fn search(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    let schema = requests::search_schema();
    let mut declared = vec![PAGING[0], PAGING[1], ("q", Rule::LINE)];
    declared.extend(FILTERS.iter().map(|f| (*f, Rule::LINE)));
    gate::query(&q, &declared, &field_names(&schema))?;
    let (offset, limit) = paging(&q)?;
    let all = |name: &str| -> Vec<String> {
        q.iter().filter(|(k, _)| k == name).map(|(_, v)| v.clone()).collect()
    };
    let categories = all("category");
    let filter = RequestFilter {
        statuses: all("status"),
        categories: (!categories.is_empty()).then_some(categories),
        originator: param(&q, "originator").map(str::to_string),
        department: param(&q, "department").map(str::to_string),
        faculty: param(&q, "faculty").map(str::to_string),
    };
    let mut reserved = vec!["offset", "limit"];
    reserved.extend(FILTERS);
    let ast = search_ast(&q, &schema, &reserved)?;
    let page = blocking(&app, move |u| u.requests.search(&s, &filter, &ast, offset, Some(limit))).await?;
    Ok(Json(page).into_response())
}

async fn get_request(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = path_id(&id)?;
    let d = blocking(&app, move |u| u.requests.get_request(&s, id)).await?;
    Ok(Json(d).into_response())
}

#[derive(Deserialize)]
struct Close {
    #[serde(rename = "Note", default)]
    note: String,
}

const CLOSE: Shape = Shape::Object(&[("Note", Shape::Named)]);

async fn close(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let b: Close = typed(gate::body(&body, &CLOSE)?)?;
    let d = blocking(&app, move |u| u.requests.close(&s, id, &b.note)).await?;
    Ok(Json(d).into_response())
}

async fn approve(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    gate::body(&body, &Shape::Object(&[]))?;
    let d = blocking(&app, move |u| u.requests.approve_specific(&s, id)).await?;
    Ok(Json(d).into_response())
}
