//! Role/permission matrix and the authorization check every gated
//! operation goes through.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::session::Session;
use crate::storage::{Criterion, EntityId, Gateway, Mutation};

/// The closed permission catalog.
pub const CATALOG: [&str; 14] = [
    "asset.add",
    "asset.search",
    "asset.update",
    "group.create",
    "group.edit",
    "location.add",
    "location.edit",
    "lab.assign",
    "software.add",
    "software.edit",
    "license.assign",
    "request.close",
    "request.approve",
    "admin.permissions",
];

pub const ADMIN: &str = "admin.permissions";

pub fn in_catalog(name: &str) -> bool {
    CATALOG.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrantRow {
    pub role_id: EntityId,
    pub permission_id: EntityId,
    pub permission: String,
    pub authorize: bool,
}

#[derive(Debug, Default)]
struct Matrix {
    permission_ids: BTreeMap<String, EntityId>,
    /// (role, permission) -> authorize
    grants: BTreeMap<(EntityId, EntityId), bool>,
}

impl Matrix {
    fn load(store: &dyn Gateway) -> Result<Self> {
        let mut m = Matrix::default();
        for p in store.scan("Permission", vec![])? {
            m.permission_ids
                .insert(p.str("PermissionName").to_string(), p.id);
        }
        for g in store.scan("RoleHasPermission", vec![])? {
            if let (Some(r), Some(p)) = (g.id_of("RoleID"), g.id_of("PermissionID")) {
                m.grants.insert((r, p), g.bool("Authorize").unwrap_or(false));
            }
        }
        Ok(m)
    }

    fn allows(&self, role: EntityId, permission: &str) -> bool {
        self.permission_ids
            .get(permission)
            .and_then(|p| self.grants.get(&(role, *p)))
            .copied()
            .unwrap_or(false)
    }
}

pub struct Permissions {
    store: Arc<dyn Gateway>,
    cache: RwLock<Option<(u64, Arc<Matrix>)>>,
    verify_calls: AtomicU64,
}

impl Permissions {
    pub fn new(store: Arc<dyn Gateway>) -> Self {
        Permissions {
            store,
            cache: RwLock::new(None),
            verify_calls: AtomicU64::new(0),
        }
    }

    /// Inserts catalog entries missing from the Permission table.
    pub fn ensure_catalog(&self) -> Result<()> {
        let present: Vec<String> = self
            .store
            .scan("Permission", vec![])?
            .iter()
            .map(|p| p.str("PermissionName").to_string())
            .collect();
        let batch: Vec<Mutation> = CATALOG
            .iter()
            .filter(|c| !present.iter().any(|p| p == *c))
            .map(|c| Mutation::insert("Permission").set("PermissionName", *c))
            .collect();
        if !batch.is_empty() {
            self.store.apply(batch)?;
        }
        Ok(())
    }

    fn matrix(&self) -> Result<Arc<Matrix>> {
        let rev = self.store.revision();
        if let Some((r, m)) = &*self.cache.read() {
            if *r == rev {
                return Ok(m.clone());
            }
        }
        let m = Arc::new(Matrix::load(self.store.as_ref())?);
        *self.cache.write() = Some((rev, m.clone()));
        Ok(m)
    }

    /// Number of `verify` calls so far; lets tests audit gating.
    pub fn verify_calls(&self) -> u64 {
        self.verify_calls.load(Ordering::SeqCst)
    }

    /// True iff the session's role holds an authorizing grant for `permission`.
    pub fn verify(&self, session: &Session, permission: &str) -> Result<bool> {
        if !in_catalog(permission) {
            return Err(Error::UnknownPermission(permission.to_string()));
        }
        self.verify_calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.matrix()?.allows(session.role_id, permission))
    }

    /// [`Permissions::verify`], turning a denial into `Forbidden`.
    pub fn require(&self, session: &Session, permission: &str) -> Result<()> {
        if self.verify(session, permission)? {
            Ok(())
        } else {
            Err(Error::Forbidden(format!(
                "user does not have permission for {permission}"
            )))
        }
    }

    /// Grant lookup by role id without a session, for menus and tooling.
    pub fn role_allows(&self, role: EntityId, permission: &str) -> Result<bool> {
        Ok(self.matrix()?.allows(role, permission))
    }

    fn role_exists(&self, role: EntityId) -> Result<()> {
        self.store.fetch("Role", role).map(|_| ())
    }

    pub fn set_grant(
        &self,
        session: &Session,
        role: EntityId,
        permission: EntityId,
        authorize: bool,
    ) -> Result<GrantRow> {
        self.require(session, ADMIN)?;
        self.role_exists(role)?;
        let perm = self.store.fetch("Permission", permission)?;
        let existing = self.store.scan(
            "RoleHasPermission",
            vec![
                Criterion::eq("RoleID", role),
                Criterion::eq("PermissionID", permission),
            ],
        )?;
        let m = match existing.first() {
            Some(row) => Mutation::update("RoleHasPermission", row.id)
                .set("Authorize", authorize)
                .expect_version(row.version),
            None => Mutation::insert("RoleHasPermission")
                .set("RoleID", role)
                .set("PermissionID", permission)
                .set("Authorize", authorize),
        };
        self.store.apply(vec![m])?;
        Ok(GrantRow {
            role_id: role,
            permission_id: permission,
            permission: perm.str("PermissionName").to_string(),
            authorize,
        })
    }

    /// Looks up a catalog permission's id.
    pub fn permission_id(&self, name: &str) -> Result<EntityId> {
        if !in_catalog(name) {
            return Err(Error::UnknownPermission(name.to_string()));
        }
        self.matrix()?
            .permission_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownPermission(name.to_string()))
    }

    /// Replaces a role's whole grant set in one batch.
    pub fn edit_role_defaults(
        &self,
        session: &Session,
        role: EntityId,
        grants: &BTreeMap<String, bool>,
    ) -> Result<BTreeMap<String, bool>> {
        self.require(session, ADMIN)?;
        self.role_exists(role)?;
        if let Some(unknown) = grants.keys().find(|k| !in_catalog(k)) {
            return Err(Error::UnknownPermission(unknown.clone()));
        }
        let missing: Vec<String> = CATALOG
            .iter()
            .filter(|c| !grants.contains_key(**c))
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteMap(missing));
        }
        let existing = self
            .store
            .scan("RoleHasPermission", vec![Criterion::eq("RoleID", role)])?;
        let mut batch = Vec::new();
        for name in CATALOG {
            let pid = self.permission_id(name)?;
            let authorize = grants[name];
            match existing.iter().find(|r| r.id_of("PermissionID") == Some(pid)) {
                Some(row) => batch.push(
                    Mutation::update("RoleHasPermission", row.id)
                        .set("Authorize", authorize)
                        .expect_version(row.version),
                ),
                None => batch.push(
                    Mutation::insert("RoleHasPermission")
                        .set("RoleID", role)
                        .set("PermissionID", pid)
                        .set("Authorize", authorize),
                ),
            }
        }
        self.store.apply(batch).map_err(|e| match e {
            // a concurrent editor inserted the same rows first
            Error::UniqueViolation { .. } => Error::Conflict {
                entity: "RoleHasPermission".into(),
                id: role.0,
            },
            e => e,
        })?;
        self.grants_of(role)
    }

    pub fn list_grants(&self, session: &Session, role: EntityId) -> Result<BTreeMap<String, bool>> {
        self.require(session, ADMIN)?;
        self.role_exists(role)?;
        self.grants_of(role)
    }

    /// Complete catalog map for a role; unset rows read as false.
    pub fn grants_of(&self, role: EntityId) -> Result<BTreeMap<String, bool>> {
        let m = self.matrix()?;
        Ok(CATALOG
            .iter()
            .map(|c| (c.to_string(), m.allows(role, c)))
            .collect())
    }
}
