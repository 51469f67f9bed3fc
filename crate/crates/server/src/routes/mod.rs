use axum::Router;

use crate::App;

mod assets;
mod auth;
mod locations;
mod query;
mod requests;
mod software;

pub fn all() -> Router<App> {
    Router::new()
        .merge(auth::routes())
        .merge(assets::routes())
        .merge(locations::routes())
        .merge(software::routes())
        .merge(requests::routes())
        .merge(query::routes())
}
