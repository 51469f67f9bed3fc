use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header::CONTENT_TYPE;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde_json::json;
use uuis_core::assets::{self, AssetInput, GroupChanges, GroupDraft, ReportRow};
use uuis_core::storage::EntityId;

use crate::error::{ApiError, ApiResult};
use crate::gate::{self, Rule, Shape};
use crate::{
    blocking, dry_run, field_names, param, paging, path_id, search_ast, typed, App, Caller, Params,
    PAGING,
};

pub fn routes() -> Router<App> {
    Router::new()
        .route("/assets", post(add_asset).get(search))
        .route("/assets/meta", get(meta))
        .route("/assets/report", get(report))
        .route("/assets/{id}", get(get_asset).put(update_asset))
        .route("/assets/{id}/params/{name}", put(set_parameter))
        .route("/groups", post(create_group).get(list_groups))
        .route("/groups/{id}", get(get_group).put(update_group).delete(delete_group))
}

const EXT: Shape = Shape::Named;

pub const ASSET: Shape = Shape::Entity(
    "PhysicalAsset",
    &[
        ("Furniture", Shape::Entity("Furniture", &[])),
        ("StorageUnit", Shape::Entity("StorageUnit", &[])),
        ("Equipment", Shape::Entity("Equipment", &[])),
        ("Computer", Shape::Entity("Computer", &[])),
        ("AdditionalParameters", Shape::Map),
    ],
);

const DRY: [(&str, Rule); 1] = [("dry_run", Rule::LINE)];

fn confirm_prompt(what: &str) -> Json<serde_json::Value> {
    Json(json!({"status": "confirm", "message": format!("Confirm {what}")}))
}

async fn add_asset(State(app): State<App>, Caller(s): Caller, Params(q): Params, body: Bytes) -> ApiResult<Response> {
    gate::query(&q, &DRY, &[])?;
    let input: AssetInput = typed(gate::body(&body, &ASSET)?)?;
    if dry_run(&q) {
        blocking(&app, move |u| u.assets.check_add_asset(&s, &input)).await?;
        return Ok(confirm_prompt("adding this asset").into_response());
    }
    let id = blocking(&app, move |u| u.assets.add_asset(&s, &input)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({"AssetID": id, "message": format!("Asset ID {id} was created")})),
    )
        .into_response())
}

async fn search(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    let schema = assets::search_schema();
    gate::query(&q, &[PAGING[0], PAGING[1], ("q", Rule::LINE)], &field_names(&schema))?;
    let (offset, limit) = paging(&q)?;
    let ast = search_ast(&q, &schema, &["offset", "limit"])?;
    let page = blocking(&app, move |u| u.assets.search(&s, &ast, offset, Some(limit))).await?;
    Ok(Json(page).into_response())
}

async fn meta(Caller(_): Caller, Params(q): Params) -> ApiResult<Json<serde_json::Value>> {
    gate::query(&q, &[], &[])?;
    Ok(Json(json!({
        "categories": assets::CATEGORIES,
        "statuses": assets::STATUSES,
        "immutable": assets::IMMUTABLE,
        "immutable_extension": assets::IMMUTABLE_EXT
            .iter()
            .map(|(e, f)| json!({"extension": e, "field": f}))
            .collect::<Vec<_>>(),
        "report_dimensions": assets::REPORT_DIMENSIONS,
        "search": assets::search_schema(),
    })))
}

fn csv_of(rows: &[ReportRow]) -> ApiResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| ApiError::from(uuis_core::Error::Io(e.to_string()));
    w.write_record(["key", "count"]).map_err(io)?;
    for r in rows {
        w.write_record([r.key.as_str(), &r.count.to_string()]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| io(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 input"))
}

async fn report(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[("dimension", Rule::LINE.required()), ("format", Rule::LINE)], &[])?;
    let dim = param(&q, "dimension").unwrap_or_default().to_string();
    let format = param(&q, "format").unwrap_or("json").to_string();
    if !matches!(format.as_str(), "json" | "csv") {
        return Err(ApiError::invalid("format", "one of json, csv"));
    }
    let rows = blocking(&app, move |u| u.assets.report(&s, &dim)).await?;
    if format == "csv" {
        return Ok(([(CONTENT_TYPE, "text/csv; charset=utf-8")], csv_of(&rows)?).into_response());
    }
    Ok(Json(json!({"rows": rows})).into_response())
}

async fn get_asset(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = path_id(&id)?;
    let d = blocking(&app, move |u| u.assets.get_asset(&s, id)).await?;
    Ok(Json(d).into_response())
}

async fn update_asset(
    State(app): State<App>,
    Caller(s): Caller,
    Path(id): Path<String>,
    Params(q): Params,
    body: Bytes,
) -> ApiResult<Response> {
    gate::query(&q, &DRY, &[])?;
    let id = path_id(&id)?;
    let input: AssetInput = typed(gate::body(&body, &ASSET)?)?;
    if dry_run(&q) {
        blocking(&app, move |u| u.assets.check_update_asset(&s, id, &input)).await?;
        return Ok(confirm_prompt("updating this asset").into_response());
    }
    let d = blocking(&app, move |u| u.assets.update_asset(&s, id, &input)).await?;
    Ok(Json(json!({"message": format!("Asset ID {id} was updated"), "asset": d})).into_response())
}

const PARAM: Shape = Shape::Object(&[("Value", EXT)]);

async fn set_parameter(
    State(app): State<App>,
    Caller(s): Caller,
    Path((id, name)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = path_id(&id)?;
    gate::check("name", &Rule::LINE, &name)?;
    let v = gate::body(&body, &PARAM)?;
    let value = match &v["Value"] {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    };
    let d = blocking(&app, move |u| {
        u.assets.set_additional_parameter(&s, id, &name, value.as_deref())
    })
    .await?;
    Ok(Json(d).into_response())
}

/// Group ids come from a free-form retrieve box; anything that is not an id
/// is simply an invalid one.
fn group_id(raw: &str) -> ApiResult<EntityId> {
    gate::check("id", &Rule::LINE, raw)?;
    raw.trim()
        .parse()
        .map(EntityId)
        .map_err(|_| uuis_core::Error::InvalidGroupId.into())
}

const GROUP: Shape = Shape::Object(&[
    ("GroupName", Shape::Named),
    ("LocationID", Shape::Named),
    ("UserID", Shape::Named),
    ("Assets", Shape::List(&Shape::Named)),
]);

async fn create_group(State(app): State<App>, Caller(s): Caller, Params(q): Params, body: Bytes) -> ApiResult<Response> {
    gate::query(&q, &DRY, &[])?;
    let draft: GroupDraft = typed(gate::body(&body, &GROUP)?)?;
    if dry_run(&q) {
        blocking(&app, move |u| u.assets.check_create_group(&s, &draft)).await?;
        return Ok(confirm_prompt("creating this group").into_response());
    }
    let id = blocking(&app, move |u| u.assets.create_group(&s, &draft)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({"GroupID": id, "message": format!("Group ID {id} was updated")})),
    )
        .into_response())
}

async fn list_groups(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[PAGING[0], PAGING[1], ("inactive", Rule::LINE)], &[])?;
    let (offset, limit) = paging(&q)?;
    let inactive = matches!(param(&q, "inactive"), Some("1" | "true"));
    let page = blocking(&app, move |u| u.assets.list_groups(&s, inactive, offset, Some(limit))).await?;
    Ok(Json(page).into_response())
}

async fn get_group(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = group_id(&id)?;
    let g = blocking(&app, move |u| u.assets.get_group(&s, id)).await?;
    Ok(Json(g).into_response())
}

async fn update_group(
    State(app): State<App>,
    Caller(s): Caller,
    Path(id): Path<String>,
    Params(q): Params,
    body: Bytes,
) -> ApiResult<Response> {
    gate::query(&q, &DRY, &[])?;
    let id = group_id(&id)?;
    let changes: GroupChanges = typed(gate::body(&body, &GROUP)?)?;
    if dry_run(&q) {
        blocking(&app, move |u| u.assets.check_update_group(&s, id, &changes)).await?;
        return Ok(confirm_prompt("updating this group").into_response());
    }
    let g = blocking(&app, move |u| u.assets.update_group(&s, id, &changes)).await?;
    Ok(Json(json!({"message": format!("Group ID {id} was updated"), "group": g})).into_response())
}

async fn delete_group(State(app): State<App>, Caller(s): Caller, Path(id): Path<String>, Params(q): Params) -> ApiResult<Response> {
    gate::query(&q, &[], &[])?;
    let id = group_id(&id)?;
    let g = blocking(&app, move |u| u.assets.delete_group(&s, id)).await?;
    Ok(Json(json!({"message": format!("Group ID {id} was deleted"), "group": g})).into_response())
}
