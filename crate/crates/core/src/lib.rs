//! Unified University Inventory System: role-scoped inventory of physical
//! assets, locations, software licenses and change requests.

pub mod assets;
pub mod auth;
pub mod clock;
pub mod context;
pub mod directory;
pub mod error;
pub mod fixture;
pub mod locations;
pub mod password;
pub mod permissions;
pub mod query;
pub mod requests;
pub mod service;
pub mod session;
pub mod software;
pub mod storage;

pub use error::{Error, Result};
pub use service::Uuis;
