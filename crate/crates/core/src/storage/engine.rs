use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde_json::{json, Map};

use super::schema::{EntityDef, KeyMode, Schema};
use super::{EntityId, Input, Mutation, MutationKind, Page, Row, Select, Target, Value};
use crate::error::{Error, Result};

pub(crate) type Table = BTreeMap<i64, Arc<Row>>;

/// Complete store content. Cloning is cheap: tables are shared until written.
#[derive(Debug, Clone, Default)]
pub(crate) struct State {
    tables: BTreeMap<&'static str, Arc<Table>>,
    next_id: BTreeMap<&'static str, i64>,
    commit: u64,
}

impl State {
    pub(crate) fn empty() -> Self {
        let mut s = State::default();
        for e in Schema::global().entities() {
            s.tables.insert(e.name, Arc::default());
            s.next_id.insert(e.name, 1);
        }
        s
    }

    pub(crate) fn table(&self, name: &str) -> &Table {
        &self.tables[name]
    }

    fn contains(&self, entity: &str, id: i64) -> bool {
        self.tables
            .get(entity)
            .is_some_and(|t| t.contains_key(&id))
    }

    pub(crate) fn counts(&self) -> BTreeMap<String, usize> {
        self.tables
            .iter()
            .map(|(k, t)| (k.to_string(), t.len()))
            .collect()
    }

    pub(crate) fn select(&self, q: &Select) -> Result<Page<Arc<Row>>> {
        let def = Schema::global().entity(&q.entity)?;
        for c in &q.criteria {
            c.validate(def)?;
        }
        if let Some(o) = &q.order {
            def.require_field(o)?;
        }
        let mut rows: Vec<Arc<Row>> = self
            .table(def.name)
            .values()
            .filter(|r| q.criteria.iter().all(|c| c.matches(&r.fields)))
            .cloned()
            .collect();
        if let Some(o) = &q.order {
            // stable sort keeps id order among equal keys
            rows.sort_by(|a, b| a.get(o).sort_cmp(b.get(o)));
        }
        Ok(Page::slice(rows, q.offset, q.limit))
    }

    /// Canonical document: `{"next_ids": {..}, "tables": {kind: [row, ..]}}`.
    pub(crate) fn to_document(&self) -> serde_json::Value {
        let mut tables = Map::new();
        for (name, t) in &self.tables {
            let rows: Vec<_> = t.values().map(|r| json!(r.fields)).collect();
            tables.insert(name.to_string(), serde_json::Value::Array(rows));
        }
        json!({ "next_ids": self.next_id, "tables": tables })
    }

    pub(crate) fn set_next_ids(&mut self, ids: &BTreeMap<String, i64>) {
        for (name, cur) in self.next_id.iter_mut() {
            if let Some(v) = ids.get(*name) {
                *cur = (*cur).max(*v);
            }
        }
    }

    /// Applies a batch in place. `seeding` permits explicit ids on generated keys.
    pub(crate) fn apply(&mut self, batch: Vec<Mutation>, seeding: bool) -> Result<Vec<EntityId>> {
        self.commit += 1;
        let mut assigned: Vec<Option<i64>> = Vec::with_capacity(batch.len());
        let mut out = Vec::new();
        for m in batch {
            let def = Schema::global().entity(&m.entity)?;
            let resolve = |t: Target, assigned: &[Option<i64>]| -> Result<i64> {
                match t {
                    Target::Id(id) => Ok(id.0),
                    Target::Inserted(i) => assigned.get(i).copied().flatten().ok_or_else(|| {
                        Error::ConstraintViolation(format!("batch position {i} is not an insert"))
                    }),
                }
            };
            let id = m.id.map(|t| resolve(t, &assigned)).transpose()?;
            let mut values = BTreeMap::new();
            for (k, v) in &m.values {
                let v = match v {
                    Input::Value(v) => v.clone(),
                    Input::Inserted(i) => Value::Int(resolve(Target::Inserted(*i), &assigned)?),
                };
                values.insert(k.clone(), v);
            }
            match m.kind {
                MutationKind::Insert => {
                    let id = self.insert(def, id, values, seeding)?;
                    assigned.push(Some(id));
                    out.push(EntityId(id));
                }
                MutationKind::Update => {
                    let id = id.ok_or_else(|| {
                        Error::ConstraintViolation("update requires an id".into())
                    })?;
                    self.update(def, id, values, m.expected_version)?;
                    assigned.push(None);
                }
                MutationKind::Delete => {
                    let id = id.ok_or_else(|| {
                        Error::ConstraintViolation("delete requires an id".into())
                    })?;
                    self.delete(def, id, m.expected_version)?;
                    assigned.push(None);
                }
            }
        }
        Ok(out)
    }

    fn insert(
        &mut self,
        def: &EntityDef,
        id: Option<i64>,
        mut values: BTreeMap<String, Value>,
        seeding: bool,
    ) -> Result<i64> {
        let id = match def.key_mode {
            KeyMode::Generated => match id {
                Some(_) if !seeding => {
                    return Err(Error::ConstraintViolation(format!(
                        "insert into {} must not carry an id",
                        def.name
                    )))
                }
                Some(id) => id,
                None => self.next_id[def.name],
            },
            KeyMode::SharedWith(parent) => {
                let id = id.ok_or_else(|| {
                    Error::ConstraintViolation(format!("{} row needs its {} key", def.name, def.key))
                })?;
                if !self.contains(parent, id) {
                    return Err(Error::ConstraintViolation(format!(
                        "{} {}={id} has no parent {parent} row",
                        def.name, def.key
                    )));
                }
                id
            }
        };
        if id <= 0 {
            return Err(Error::ConstraintViolation(format!(
                "{} id must be positive",
                def.name
            )));
        }
        if self.contains(def.name, id) {
            return Err(Error::ConstraintViolation(format!(
                "{} #{id} already exists",
                def.name
            )));
        }
        if values.contains_key(def.key) {
            return Err(Error::ConstraintViolation(format!(
                "{} is assigned by the store",
                def.key
            )));
        }
        for f in &def.fields {
            if !values.contains_key(f.name) {
                if let Some(d) = &f.default {
                    values.insert(f.name.to_string(), d.clone());
                }
            }
        }
        values.insert(def.key.to_string(), Value::Int(id));
        self.check_row(def, id, &values)?;
        let row = Row {
            id: EntityId(id),
            version: self.commit,
            fields: values,
        };
        let next = self.next_id.get_mut(def.name).expect("registered");
        if def.key_mode == KeyMode::Generated {
            *next = (*next).max(id + 1);
        }
        Arc::make_mut(self.tables.get_mut(def.name).expect("registered")).insert(id, Arc::new(row));
        Ok(id)
    }

    fn update(
        &mut self,
        def: &EntityDef,
        id: i64,
        values: BTreeMap<String, Value>,
        expected: Option<u64>,
    ) -> Result<()> {
        let current = self
            .table(def.name)
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(def.name, id))?;
        if expected.is_some_and(|v| v != current.version) {
            return Err(Error::Conflict {
                entity: def.name.to_string(),
                id,
            });
        }
        if values.contains_key(def.key) {
            return Err(Error::ConstraintViolation(format!(
                "{} cannot be changed",
                def.key
            )));
        }
        let mut fields = current.fields.clone();
        fields.extend(values);
        self.check_row(def, id, &fields)?;
        let row = Row {
            id: EntityId(id),
            version: self.commit,
            fields,
        };
        Arc::make_mut(self.tables.get_mut(def.name).expect("registered")).insert(id, Arc::new(row));
        Ok(())
    }

    fn delete(&mut self, def: &EntityDef, id: i64, expected: Option<u64>) -> Result<()> {
        let current = self
            .table(def.name)
            .get(&id)
            .ok_or_else(|| Error::not_found(def.name, id))?;
        if expected.is_some_and(|v| v != current.version) {
            return Err(Error::Conflict {
                entity: def.name.to_string(),
                id,
            });
        }
        for (referrer, col) in Schema::global().referrers(def.name) {
            let hit = self
                .table(referrer.name)
                .values()
                .any(|r| r.int(col) == Some(id));
            if hit {
                return Err(Error::ConstraintViolation(format!(
                    "{} #{id} is still referenced by {}.{col}",
                    def.name, referrer.name
                )));
            }
        }
        Arc::make_mut(self.tables.get_mut(def.name).expect("registered")).remove(&id);
        Ok(())
    }

    /// Type, length, NOT NULL, foreign-key and uniqueness checks for a full row.
    fn check_row(&self, def: &EntityDef, id: i64, fields: &BTreeMap<String, Value>) -> Result<()> {
        for name in fields.keys() {
            def.require_field(name)?;
        }
        for f in &def.fields {
            let v = fields.get(f.name).unwrap_or(&Value::Null);
            if v.is_null() {
                if !f.nullable {
                    return Err(Error::ConstraintViolation(format!(
                        "{}.{} must not be null",
                        def.name, f.name
                    )));
                }
                continue;
            }
            if !f.ty.accepts(v) {
                return Err(Error::ConstraintViolation(format!(
                    "{}.{} expects {}",
                    def.name,
                    f.name,
                    f.ty.describe()
                )));
            }
            if let (super::FieldType::Text(max), Value::Text(s)) = (f.ty, v) {
                if s.chars().count() > max {
                    return Err(Error::FieldTooLong {
                        field: f.name.to_string(),
                        max,
                    });
                }
            }
            if let Some(target) = f.references {
                let key = v.as_int().unwrap_or_default();
                if !self.contains(target, key) {
                    return Err(Error::ConstraintViolation(format!(
                        "{}.{}={key} references missing {target}",
                        def.name, f.name
                    )));
                }
            }
        }
        for cols in &def.unique {
            let key: Vec<&Value> = cols
                .iter()
                .map(|c| fields.get(*c).unwrap_or(&Value::Null))
                .collect();
            if key.iter().any(|v| v.is_null()) {
                continue;
            }
            let clash = self.table(def.name).values().any(|r| {
                r.id.0 != id && cols.iter().zip(&key).all(|(c, v)| r.get(c) == *v)
            });
            if clash {
                return Err(Error::UniqueViolation {
                    entity: def.name.to_string(),
                    fields: cols.iter().map(|c| c.to_string()).collect(),
                });
            }
        }
        Ok(())
    }
}

/// Shared machinery behind both backends: concurrent readers over an
/// immutable state, one writer at a time.
pub(crate) struct Engine {
    state: RwLock<Arc<State>>,
    writer: Mutex<()>,
    revision: AtomicU64,
}

impl Engine {
    pub(crate) fn new(state: State) -> Self {
        Engine {
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
            revision: AtomicU64::new(0),
        }
    }

    pub(crate) fn revision(&self) -> u64 {
        self.revision.load(Ordering::SeqCst)
    }

    pub(crate) fn read(&self) -> Arc<State> {
        self.state.read().clone()
    }

    /// Runs `change` on a private copy, then `persist`s it, then publishes it.
    /// Any error leaves the published state untouched.
    pub(crate) fn commit<T>(
        &self,
        change: impl FnOnce(&mut State) -> Result<T>,
        persist: impl FnOnce(&State) -> Result<()>,
    ) -> Result<T> {
        let _guard = self.writer.lock();
        let mut next = (*self.read()).clone();
        let out = change(&mut next)?;
        persist(&next)?;
        *self.state.write() = Arc::new(next);
        self.revision.fetch_add(1, Ordering::SeqCst);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{Criterion, Select};

    fn seeded() -> State {
        let mut s = State::empty();
        s.apply(
            vec![
                Mutation::insert("Faculty").set("FacultyName", "ENCS"),
                Mutation::insert("Department")
                    .set_ref("FacultyID", 0)
                    .set("DepartmentName", "CSE"),
                Mutation::insert("Role").set("Level", 0i64),
                Mutation::insert("User")
                    .set_ref("RoleID", 2)
                    .set("UserName", "u")
                    .set("Password", "x"),
            ],
            false,
        )
        .unwrap();
        s
    }

    #[test]
    fn ids_are_monotone_and_not_reused() {
        let mut s = seeded();
        let a = s
            .apply(vec![Mutation::insert("Role").set("Level", 1i64)], false)
            .unwrap()[0];
        s.apply(vec![Mutation::delete("Role", a)], false).unwrap();
        let b = s
            .apply(vec![Mutation::insert("Role").set("Level", 1i64)], false)
            .unwrap()[0];
        assert!(b > a);
    }

    #[test]
    fn defaults_fill_missing_columns() {
        let mut s = seeded();
        let id = s
            .apply(
                vec![Mutation::insert("Request")
                    .set("UserID", 1i64)
                    .set("Kind", "General")
                    .set("Category", "Technical")],
                false,
            )
            .unwrap()[0];
        assert_eq!(s.table("Request")[&id.0].str("Status"), "Pending");
    }

    #[test]
    fn foreign_keys_checked() {
        let mut s = seeded();
        let err = s
            .apply(
                vec![Mutation::insert("Request")
                    .set("UserID", 99i64)
                    .set("Kind", "General")
                    .set("Category", "Technical")],
                false,
            )
            .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)), "{err:?}");
    }

    #[test]
    fn text_limit_enforced() {
        let mut s = seeded();
        let err = s
            .apply(
                vec![Mutation::update("User", EntityId(1)).set("FirstName", "x".repeat(65))],
                false,
            )
            .unwrap_err();
        assert_eq!(
            err,
            Error::FieldTooLong {
                field: "FirstName".into(),
                max: 64
            }
        );
    }

    #[test]
    fn unique_and_referenced_delete() {
        let mut s = seeded();
        let err = s
            .apply(
                vec![Mutation::insert("Faculty").set("FacultyName", "ENCS")],
                false,
            )
            .unwrap_err();
        assert!(matches!(err, Error::UniqueViolation { .. }));
        let err = s
            .apply(vec![Mutation::delete("Faculty", EntityId(1))], false)
            .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)));
    }

    #[test]
    fn extension_needs_parent() {
        let mut s = seeded();
        let err = s
            .apply(
                vec![Mutation::insert_ext("Lab", EntityId(5)).set("LabType", "x")],
                false,
            )
            .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)));
    }

    #[test]
    fn version_conflict() {
        let mut s = seeded();
        let v = s.table("User")[&1].version;
        s.apply(
            vec![Mutation::update("User", EntityId(1)).set("FirstName", "A")],
            false,
        )
        .unwrap();
        let err = s
            .apply(
                vec![Mutation::update("User", EntityId(1))
                    .set("FirstName", "B")
                    .expect_version(v)],
                false,
            )
            .unwrap_err();
        assert!(matches!(err, Error::Conflict { .. }));
    }

    #[test]
    fn select_orders_then_ids() {
        let mut s = seeded();
        for lvl in [3i64, 1, 3, 2] {
            s.apply(vec![Mutation::insert("Role").set("Level", lvl)], false)
                .unwrap();
        }
        let page = s
            .select(&Select::from("Role").order_by("Level"))
            .unwrap();
        let got: Vec<(i64, i64)> = page
            .items
            .iter()
            .map(|r| (r.int("Level").unwrap(), r.id.0))
            .collect();
        assert_eq!(got, vec![(0, 1), (1, 3), (2, 5), (3, 2), (3, 4)]);
        let err = s
            .select(&Select::from("Role").filter(Criterion::eq("Nope", 1i64)))
            .unwrap_err();
        assert!(matches!(err, Error::UnknownField { .. }));
        assert!(matches!(
            s.select(&Select::from("Nope")).unwrap_err(),
            Error::UnknownEntityKind(_)
        ));
    }
}
