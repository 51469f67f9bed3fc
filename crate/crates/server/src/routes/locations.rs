use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use uuis_core::locations::{BuildingDraft, LocationInput};
use uuis_core::session::Locale;
use uuis_core::storage::EntityId;

use crate::error::{ApiError, ApiResult};
use crate::gate::{self, Rule, Shape};
use crate::{blocking, param, paging, path_id, typed, App, Caller, Params, PAGING};

pub fn routes() -> Router<App> {
    Router::new()
        .route("/buildings", post(create_building))
        .route("/locations", post(add_location).get(search))
        .route("/locations/config", get(config))
        .route("/locations/{id}", get(get_location).put(edit_location))
        .route("/locations/{id}/responsible", put(assign_responsible))
        .route("/locations/{id}/members", post(add_member))
}

const BUILDING: Shape = Shape::Entity("Building", &[("FloorCount", Shape::Scalar(Rule::DIGITS.required()))]);

pub const LOCATION: Shape = Shape::Entity(
    "Location",
    &[
        ("Lab", Shape::Entity("Lab", &[])),
        ("Room", Shape::Entity("Room", &[])),
        ("Office", Shape::Entity("Office", &[])),
        ("StorageCompartment", Shape::Entity("StorageCompartment", &[])),
    ],
);

async fn create_building(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Response> {
    let draft: BuildingDraft = typed(gate::body(&body, &BUILDING)?)?;
    let b = blocking(&app, move |u| u.locations.create_building(&s, &draft)).await?;
    Ok((StatusCode::CREATED, Json(b)).into_response())
}

async fn add_location(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Response> {
    let input: LocationInput = typed(gate::body(&body, &LOCATION)?)?;
    let id = blocking(&app, move |u| u.locations.add_location(&s, &input)).await?;
    Ok((StatusCode::CREATED, Json(json!({"LocationID": id}))).into_response())
}

/// `q=` goes through the query language; field inputs match as substrings.
async fn search(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    let cfg = app.uuis.locations.config();
    let visible: Vec<&str> = cfg.fields.iter().filter(|f| f.visible).map(|f| f.name.as_str()).collect();
    gate::query(&q, &[PAGING[0], PAGING[1], ("q", Rule::LINE)], &visible)?;
    let (offset, limit) = paging(&q)?;
    let fields: BTreeMap<String, String> = q
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "q" | "offset" | "limit"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let page = match param(&q, "q") {
        Some(_) if !fields.is_empty() => {
            return Err(ApiError::invalid("q", "give either q or field inputs, not both"))
        }
        Some(text) => {
            let text = text.to_string();
            blocking(&app, move |u| u.locations.search_query(&s, &text, offset, Some(limit))).await?
        }
        None => blocking(&app, move |u| u.locations.search(&s, &fields, offset, Some(limit))).await?,
    };
    Ok(Json(page).into_response())
}

/// Field labels for result headers, in the requested or session locale.
async fn config(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[("locale", Rule::LINE)], &[])?;
    let locale = match param(&q, "locale") {
        Some(l) => l
            .parse::<Locale>()
            .map_err(|_| ApiError::invalid("locale", "one of en, fr"))?,
        None => s.locale,
    };
    Ok(Json(app.uuis.locations.config_view(Some(locale))).into_response())
}

async fn get_location(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = path_id(&id)?;
    let d = blocking(&app, move |u| u.locations.get_location(&s, id)).await?;
    Ok(Json(d).into_response())
}

async fn edit_location(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let input: LocationInput = typed(gate::body(&body, &LOCATION)?)?;
    let d = blocking(&app, move |u| u.locations.edit_location(&s, id, &input)).await?;
    Ok(Json(d).into_response())
}

#[derive(Deserialize)]
struct UserRef {
    #[serde(rename = "UserID")]
    user: i64,
}

const USER_REF: Shape = Shape::Object(&[("UserID", Shape::Scalar(Rule::DIGITS.required()))]);

async fn assign_responsible(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let b: UserRef = typed(gate::body(&body, &USER_REF)?)?;
    let d = blocking(&app, move |u| u.locations.assign_lab_responsible(&s, id, EntityId(b.user))).await?;
    Ok(Json(d).into_response())
}

async fn add_member(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let id = path_id(&id)?;
    let b: UserRef = typed(gate::body(&body, &USER_REF)?)?;
    let d = blocking(&app, move |u| u.locations.add_lab_member(&s, id, EntityId(b.user))).await?;
    Ok((StatusCode::CREATED, Json(d)).into_response())
}
