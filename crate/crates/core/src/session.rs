use serde::{Deserialize, Serialize};

use crate::storage::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locale {
    #[default]
    En,
    Fr,
}

impl std::str::FromStr for Locale {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "en" => Ok(Locale::En),
            "fr" => Ok(Locale::Fr),
            _ => Err(()),
        }
    }
}

/// Resolved caller identity, passed to every session-scoped operation.
#[derive(Debug, Clone, Serialize)]
pub struct Session {
    #[serde(skip)]
    pub token: String,
    pub user_id: EntityId,
    pub user_name: String,
    pub role_id: EntityId,
    /// Scoping tier 0..=3.
    pub level: u8,
    pub department_id: Option<EntityId>,
    pub faculty_id: Option<EntityId>,
    pub faculty_name: Option<String>,
    pub locale: Locale,
}
