//! Wires every module over one store.

use std::path::Path;
use std::sync::Arc;

use crate::assets::Assets;
use crate::auth::{Auth, AuthConfig};
use crate::clock::{Clock, SystemClock};
use crate::context::Context;
use crate::error::Result;
use crate::locations::Locations;
use crate::permissions::Permissions;
use crate::requests::Requests;
use crate::software::Software;
use crate::storage::{Gateway, SeedSummary};

pub struct Uuis {
    pub store: Arc<dyn Gateway>,
    pub perms: Arc<Permissions>,
    pub cx: Arc<Context>,
    pub auth: Auth,
    pub assets: Assets,
    pub locations: Locations,
    pub software: Software,
    pub requests: Requests,
}

impl Uuis {
    pub fn new(store: Arc<dyn Gateway>, clock: Arc<dyn Clock>, cfg: AuthConfig) -> Self {
        let perms = Arc::new(Permissions::new(store.clone()));
        let cx = Arc::new(Context::new(store.clone(), perms.clone()));
        Uuis {
            auth: Auth::new(store.clone(), perms.clone(), clock, cfg),
            assets: Assets::new(cx.clone()),
            locations: Locations::new(cx.clone()),
            software: Software::new(cx.clone()),
            requests: Requests::new(cx.clone()),
            store,
            perms,
            cx,
        }
    }

    pub fn with_defaults(store: Arc<dyn Gateway>) -> Self {
        Self::new(store, Arc::new(SystemClock), AuthConfig::default())
    }

    /// Replaces the store content with a fixture and completes the
    /// permission catalog.
    pub fn seed(&self, path: &Path) -> Result<SeedSummary> {
        let summary = self.store.load_seed(path)?;
        self.perms.ensure_catalog()?;
        Ok(summary)
    }

    pub fn seed_str(&self, json: &str) -> Result<SeedSummary> {
        let summary = self.store.load_seed_str(json)?;
        self.perms.ensure_catalog()?;
        Ok(summary)
    }
}
