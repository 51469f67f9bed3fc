//! State shared by the domain services.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::directory::Directory;
use crate::error::{Error, Result};
use crate::permissions::Permissions;
use crate::storage::{EntityDef, EntityId, FieldType, Gateway, Value};

pub struct Context {
    pub store: Arc<dyn Gateway>,
    pub perms: Arc<Permissions>,
    directory: RwLock<Option<(u64, Arc<Directory>)>>,
}

impl Context {
    pub fn new(store: Arc<dyn Gateway>, perms: Arc<Permissions>) -> Self {
        Context {
            store,
            perms,
            directory: RwLock::new(None),
        }
    }

    /// Directory snapshot, reloaded whenever the store has changed.
    pub fn directory(&self) -> Result<Arc<Directory>> {
        let rev = self.store.revision();
        if let Some((r, d)) = &*self.directory.read() {
            if *r == rev {
                return Ok(d.clone());
            }
        }
        let d = Arc::new(Directory::load(self.store.as_ref())?);
        *self.directory.write() = Some((rev, d.clone()));
        Ok(d)
    }

    pub fn exists(&self, entity: &str, id: EntityId) -> Result<bool> {
        Ok(self.store.get(entity, id)?.is_some())
    }
}

/// Raw JSON field map as received from a client.
pub type Fields = BTreeMap<String, serde_json::Value>;

/// Decodes one client value against a column. Empty text on a nullable
/// column reads as null.
pub fn decode(def: &EntityDef, field: &str, raw: &serde_json::Value) -> Result<Value> {
    let f = def.require_field(field)?;
    let v = f.ty.decode(field, raw).map_err(|_| {
        Error::invalid(field, format!("expected {}", f.ty.describe()))
    })?;
    if let (FieldType::Text(max), Value::Text(s)) = (f.ty, &v) {
        if s.chars().count() > max {
            return Err(Error::FieldTooLong {
                field: field.to_string(),
                max,
            });
        }
        if s.is_empty() && f.nullable {
            return Ok(Value::Null);
        }
    }
    Ok(v)
}

/// Decodes every entry of `raw`, rejecting the key column.
pub fn decode_all(def: &EntityDef, raw: &Fields) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for (k, v) in raw {
        if k == def.key {
            return Err(Error::ImmutableField(k.clone()));
        }
        out.insert(k.clone(), decode(def, k, v)?);
    }
    Ok(out)
}

pub fn text_of(v: &Value) -> Option<&str> {
    v.as_text().filter(|s| !s.trim().is_empty())
}
