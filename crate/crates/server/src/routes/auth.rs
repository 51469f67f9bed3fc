use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header::SET_COOKIE;
use axum::http::HeaderValue;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use uuis_core::auth::{AccountChanges, LoginOutcome};
use uuis_core::session::{Locale, Session};
use uuis_core::storage::EntityId;

use crate::error::{ApiError, ApiResult};
use crate::gate::{self, Rule, Shape};
use crate::{blocking, path_id, typed, App, Caller, Params, Token, SESSION_COOKIE};

pub fn routes() -> Router<App> {
    Router::new()
        .route("/auth/login", post(login))
        .route("/auth/choose-department", post(choose_department))
        .route("/auth/logout", post(logout))
        .route("/auth/logout/confirm", post(confirm_logout))
        .route("/auth/change-password", post(change_password))
        .route("/auth/challenge", get(challenge))
        .route("/auth/reset-password", post(reset_password))
        .route("/auth/reset-password/complete", post(complete_reset))
        .route("/account", get(view_account).put(update_account))
        .route("/account/locale", put(set_locale))
        .route("/menu", get(menu))
        .route("/admin/roles/{id}/grants", get(list_grants).put(edit_grants))
        .route("/admin/roles/{id}/grants/{permission}", put(set_grant))
}

fn session_cookie(token: &str, max_age: Option<u32>) -> HeaderValue {
    let mut c = format!("{SESSION_COOKIE}={token}; HttpOnly; SameSite=Strict; Path=/");
    if let Some(a) = max_age {
        c.push_str(&format!("; Max-Age={a}"));
    }
    HeaderValue::from_str(&c).expect("token is url-safe")
}

fn signed_in(u: &uuis_core::Uuis, s: Session) -> uuis_core::Result<Response> {
    let menu = u.auth.list_menu(&s)?;
    let mut resp = Json(json!({"status": "signed-in", "session": s, "menu": menu})).into_response();
    resp.headers_mut().insert(SET_COOKIE, session_cookie(&s.token, None));
    Ok(resp)
}

#[derive(Deserialize)]
struct LoginBody {
    #[serde(rename = "UserName", default)]
    user: String,
    #[serde(rename = "Password", default)]
    password: String,
}

const LOGIN: Shape = Shape::Object(&[
    ("UserName", Shape::Scalar(Rule::LINE)),
    ("Password", Shape::Scalar(Rule::LINE)),
]);

async fn login(State(app): State<App>, body: Bytes) -> ApiResult<Response> {
    let b: LoginBody = typed(gate::body(&body, &LOGIN)?)?;
    blocking(&app, move |u| match u.auth.login(&b.user, &b.password)? {
        LoginOutcome::Session(s) => signed_in(u, s),
        LoginOutcome::Pending {
            pending_token,
            departments,
        } => Ok(Json(json!({
            "status": "choose-department",
            "pending_token": pending_token,
            "departments": departments,
        }))
        .into_response()),
    })
    .await
}

#[derive(Deserialize)]
struct ChooseBody {
    pending_token: String,
    #[serde(rename = "DepartmentID")]
    department: i64,
}

const CHOOSE: Shape = Shape::Object(&[
    ("pending_token", Shape::Scalar(Rule::LINE.required())),
    ("DepartmentID", Shape::Scalar(Rule::DIGITS.required())),
]);

async fn choose_department(State(app): State<App>, body: Bytes) -> ApiResult<Response> {
    let b: ChooseBody = typed(gate::body(&body, &CHOOSE)?)?;
    blocking(&app, move |u| {
        let s = u.auth.choose_department(&b.pending_token, EntityId(b.department))?;
        signed_in(u, s)
    })
    .await
}

async fn logout(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    gate::body(&body, &Shape::Object(&[]))?;
    let confirm = blocking(&app, move |u| u.auth.logout(&s)).await?;
    Ok(Json(json!({
        "message": "Confirm logout",
        "confirm_token": confirm,
    })))
}

#[derive(Deserialize)]
struct ConfirmBody {
    confirm_token: String,
}

const CONFIRM: Shape = Shape::Object(&[("confirm_token", Shape::Scalar(Rule::LINE.required()))]);

async fn confirm_logout(State(app): State<App>, Token(token): Token, body: Bytes) -> ApiResult<Response> {
    let b: ConfirmBody = typed(gate::body(&body, &CONFIRM)?)?;
    blocking(&app, move |u| u.auth.confirm_logout(&token, &b.confirm_token)).await?;
    let mut resp = Json(json!({"status": "signed-out"})).into_response();
    resp.headers_mut().insert(SET_COOKIE, session_cookie("", Some(0)));
    Ok(resp)
}

#[derive(Deserialize)]
struct ChangeBody {
    #[serde(rename = "OldPassword", default)]
    old: String,
    #[serde(rename = "NewPassword", default)]
    new1: String,
    #[serde(rename = "ConfirmPassword", default)]
    new2: String,
}

const CHANGE: Shape = Shape::Object(&[
    ("OldPassword", Shape::Scalar(Rule::LINE)),
    ("NewPassword", Shape::Scalar(Rule::LINE)),
    ("ConfirmPassword", Shape::Scalar(Rule::LINE)),
]);

async fn change_password(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let b: ChangeBody = typed(gate::body(&body, &CHANGE)?)?;
    blocking(&app, move |u| u.auth.change_password(&s, &b.old, &b.new1, &b.new2)).await?;
    Ok(Json(json!({"message": "Password changed"})))
}

async fn challenge(State(app): State<App>, Params(q): Params) -> ApiResult<Json<serde_json::Value>> {
    gate::query(&q, &[], &[])?;
    let c = app.uuis.auth.issue_challenge();
    Ok(Json(json!(c)))
}

#[derive(Deserialize)]
struct ResetBody {
    #[serde(rename = "UserName", default)]
    user: String,
    challenge_id: String,
    answer: String,
}

const RESET: Shape = Shape::Object(&[
    ("UserName", Shape::Scalar(Rule::LINE)),
    ("challenge_id", Shape::Scalar(Rule::LINE.required())),
    ("answer", Shape::Scalar(Rule::LINE.required())),
]);

/// Always answers the same way whether or not the user exists.
async fn reset_password(State(app): State<App>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let b: ResetBody = typed(gate::body(&body, &RESET)?)?;
    blocking(&app, move |u| u.auth.reset_password(&b.user, &b.challenge_id, &b.answer)).await?;
    Ok(Json(json!({"message": "If the account exists, a reset link was sent"})))
}

#[derive(Deserialize)]
struct CompleteBody {
    token: String,
    #[serde(rename = "NewPassword", default)]
    new1: String,
    #[serde(rename = "ConfirmPassword", default)]
    new2: String,
}

const COMPLETE: Shape = Shape::Object(&[
    ("token", Shape::Scalar(Rule::LINE.required())),
    ("NewPassword", Shape::Scalar(Rule::LINE)),
    ("ConfirmPassword", Shape::Scalar(Rule::LINE)),
]);

async fn complete_reset(State(app): State<App>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let b: CompleteBody = typed(gate::body(&body, &COMPLETE)?)?;
    blocking(&app, move |u| u.auth.complete_reset(&b.token, &b.new1, &b.new2)).await?;
    Ok(Json(json!({"message": "Password changed"})))
}

async fn view_account(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Json<serde_json::Value>> {
    gate::query(&q, &[], &[])?;
    let locale = s.locale;
    let a = blocking(&app, move |u| u.auth.view_account(&s)).await?;
    Ok(Json(json!({"account": a, "locale": locale})))
}

const ACCOUNT: Shape = Shape::Object(&[
    ("FirstName", Shape::Named),
    ("LastName", Shape::Named),
    ("Email", Shape::Named),
]);

async fn update_account(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let changes: AccountChanges = typed(gate::body(&body, &ACCOUNT)?)?;
    let a = blocking(&app, move |u| u.auth.update_account(&s, &changes)).await?;
    Ok(Json(json!({"account": a})))
}

const LOCALE: Shape = Shape::Object(&[("locale", Shape::Scalar(Rule::LINE.required()))]);

async fn set_locale(State(app): State<App>, Caller(s): Caller, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let v = gate::body(&body, &LOCALE)?;
    let locale: Locale = v["locale"]
        .as_str()
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| ApiError::invalid("locale", "one of en, fr"))?;
    blocking(&app, move |u| u.auth.set_locale(&s, locale)).await?;
    Ok(Json(json!({"locale": locale})))
}

async fn menu(State(app): State<App>, Caller(s): Caller, Params(q): Params) -> ApiResult<Json<serde_json::Value>> {
    gate::query(&q, &[], &[])?;
    let m = blocking(&app, move |u| u.auth.list_menu(&s)).await?;
    Ok(Json(json!({"menu": m})))
}

async fn list_grants(
    State(app): State<App>,
    Caller(s): Caller,
    Path(role): Path<String>,
    Params(q): Params,
) -> ApiResult<Json<serde_json::Value>> {
    gate::query(&q, &[], &[])?;
    let role = path_id(&role)?;
    let g = blocking(&app, move |u| u.perms.list_grants(&s, role)).await?;
    Ok(Json(json!({"RoleID": role, "grants": g})))
}

async fn edit_grants(
    State(app): State<App>,
    Caller(s): Caller,
    Path(role): Path<String>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let role = path_id(&role)?;
    let grants: BTreeMap<String, bool> = typed(gate::body(&body, &Shape::Map)?)?;
    let g = blocking(&app, move |u| u.perms.edit_role_defaults(&s, role, &grants)).await?;
    Ok(Json(json!({"RoleID": role, "grants": g})))
}

#[derive(Deserialize)]
struct GrantBody {
    #[serde(rename = "Authorize")]
    authorize: bool,
}

const GRANT: Shape = Shape::Object(&[("Authorize", Shape::Scalar(Rule::LINE.required()))]);

async fn set_grant(
    State(app): State<App>,
    Caller(s): Caller,
    Path((role, permission)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let role = path_id(&role)?;
    gate::check("permission", &Rule::LINE, &permission)?;
    let b: GrantBody = typed(gate::body(&body, &GRANT)?)?;
    let row = blocking(&app, move |u| {
        let pid = u.perms.permission_id(&permission)?;
        u.perms.set_grant(&s, role, pid, b.authorize)
    })
    .await?;
    Ok(Json(json!(row)))
}
