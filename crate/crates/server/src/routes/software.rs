use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::json;
use uuis_core::context::Fields;
use uuis_core::software;
use uuis_core::storage::EntityId;

use crate::error::{ApiError, ApiResult};
use crate::gate::{self, Rule, Shape};
use crate::{blocking, field_names, int_param, param, paging, path_id, search_ast, typed, App, Caller, Params, PAGING};

pub fn routes() -> Router<App> {
    Router::new()
        .route("/software", post(add_software).get(search))
        .route("/software/{id}", get(get_software).put(edit_software))
        .route("/software/{id}/licenses", post(add_license))
        .route("/licenses/expiring", get(expiring))
        .route("/licenses/{id}/assign", post(assign))
        .route("/licenses/{id}/install", post(install))
}

pub const SOFTWARE: Shape = Shape::Entity("Software", &[]);
pub const LICENSE: Shape = Shape::Entity("License", &[]);

async fn add_software(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Response> {
    let draft: Fields = typed(gate::body(&body, &SOFTWARE)?)?;
    let id = blocking(&app, move |u| u.software.add_software(&s, &draft)).await?;
    Ok((StatusCode::CREATED, Json(json!({"SoftwareID": id}))).into_response())
}

async fn search(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    let schema = software::search_schema();
    gate::query(&q, &[PAGING[0], PAGING[1], ("q", Rule::LINE)], &field_names(&schema))?;
    let (offset, limit) = paging(&q)?;
    let ast = search_ast(&q, &schema, &["offset", "limit"])?;
    let page = blocking(&app, move |u| u.software.search(&s, &ast, offset, Some(limit))).await?;
    Ok(Json(page).into_response())
}

async fn get_software(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = path_id(&id)?;
    let d = blocking(&app, move |u| u.software.get_software(&s, id)).await?;
    Ok(Json(d).into_response())
}

async fn edit_software(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let changes: Fields = typed(gate::body(&body, &SOFTWARE)?)?;
    let d = blocking(&app, move |u| u.software.edit_software(&s, id, &changes)).await?;
    Ok(Json(d).into_response())
}

async fn add_license(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let draft: Fields = typed(gate::body(&body, &LICENSE)?)?;
    let lic = blocking(&app, move |u| u.software.add_license(&s, id, &draft)).await?;
    Ok((StatusCode::CREATED, Json(json!({"LicenseID": lic}))).into_response())
}

#[derive(Deserialize)]
struct UserRef {
    #[serde(rename = "UserID")]
    user: i64,
}

#[derive(Deserialize)]
struct AssetRef {
    #[serde(rename = "AssetID")]
    asset: i64,
}

async fn assign(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    const SHAPE: Shape = Shape::Object(&[("UserID", Shape::Scalar(Rule::DIGITS.required()))]);
    let b: UserRef = typed(gate::body(&body, &SHAPE)?)?;
    let used = blocking(&app, move |u| u.software.assign_license(&s, id, EntityId(b.user))).await?;
    Ok((StatusCode::CREATED, Json(used)).into_response())
}

async fn install(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    const SHAPE: Shape = Shape::Object(&[("AssetID", Shape::Scalar(Rule::DIGITS.required()))]);
    let b: AssetRef = typed(gate::body(&body, &SHAPE)?)?;
    let used = blocking(&app, move |u| u.software.install_license(&s, id, EntityId(b.asset))).await?;
    Ok((StatusCode::CREATED, Json(used)).into_response())
}

async fn expiring(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[("days", Rule::DIGITS.required()), ("as_of", Rule::LINE)], &[])?;
    let days = int_param(&q, "days")?.unwrap_or_default();
    let as_of = match param(&q, "as_of") {
        Some(d) => NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|_| ApiError::invalid("as_of", "expected YYYY-MM-DD"))?,
        None => chrono::Utc::now().date_naive(),
    };
    let r = blocking(&app, move |u| u.software.licenses_near_expiry(&s, days, as_of)).await?;
    Ok(Json(r).into_response())
}
