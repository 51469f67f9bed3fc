//! Persistence gateway.
//!
//! Domain modules talk to storage only through [`Gateway`]: filtered
//! selects, atomic mutation batches and seed loading. Two backends ship:
//! [`MemoryStore`] and the single-file [`FileStore`].

mod engine;
mod file;
mod memory;
pub mod schema;
mod seed;
pub mod value;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

pub use file::FileStore;
pub use memory::MemoryStore;
pub use schema::{EntityDef, FieldDef, FieldType, KeyMode, Schema};
pub use seed::SeedSummary;
pub use value::{format_time, parse_time, EntityId, Value};

use crate::error::{Error, Result};

/// A committed record. Handed out as an immutable snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub id: EntityId,
    #[serde(skip)]
    pub version: u64,
    pub fields: BTreeMap<String, Value>,
}

impl Row {
    pub fn get(&self, field: &str) -> &Value {
        static NULL: Value = Value::Null;
        self.fields.get(field).unwrap_or(&NULL)
    }

    pub fn int(&self, field: &str) -> Option<i64> {
        self.get(field).as_int()
    }

    pub fn id_of(&self, field: &str) -> Option<EntityId> {
        self.int(field).map(EntityId)
    }

    pub fn text(&self, field: &str) -> Option<&str> {
        self.get(field).as_text()
    }

    /// Text value or the empty string.
    pub fn str(&self, field: &str) -> &str {
        self.text(field).unwrap_or("")
    }

    pub fn bool(&self, field: &str) -> Option<bool> {
        self.get(field).as_bool()
    }
}

/// Comparison applied to one field.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Equals(Value),
    /// Case-insensitive text equality.
    TextEquals(String),
    /// Case-insensitive substring.
    Contains(String),
    StartsWith(String),
    EndsWith(String),
    /// Case-insensitive glob where `*` matches any run of characters.
    Like(String),
    InSet(Vec<Value>),
    LessThan(Value),
    GreaterOrEqual(Value),
    IsNull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub field: String,
    pub op: Op,
}

impl Criterion {
    pub fn new(field: impl Into<String>, op: Op) -> Self {
        Criterion {
            field: field.into(),
            op,
        }
    }

    pub fn eq(field: impl Into<String>, v: impl Into<Value>) -> Self {
        Self::new(field, Op::Equals(v.into()))
    }

    pub fn contains(field: impl Into<String>, s: impl Into<String>) -> Self {
        Self::new(field, Op::Contains(s.into()))
    }

    pub fn in_set(field: impl Into<String>, vs: impl IntoIterator<Item = Value>) -> Self {
        Self::new(field, Op::InSet(vs.into_iter().collect()))
    }

    pub fn is_null(field: impl Into<String>) -> Self {
        Self::new(field, Op::IsNull)
    }

    fn is_text_op(&self) -> bool {
        matches!(
            self.op,
            Op::TextEquals(_) | Op::Contains(_) | Op::StartsWith(_) | Op::EndsWith(_) | Op::Like(_)
        )
    }

    /// Checks the criterion against an entity definition.
    pub fn validate(&self, def: &EntityDef) -> Result<()> {
        let f = def.require_field(&self.field)?;
        if self.is_text_op() && !matches!(f.ty, FieldType::Text(_)) {
            return Err(Error::invalid(
                self.field.clone(),
                "text matching on a non-text field",
            ));
        }
        Ok(())
    }

    /// Evaluates against a field map; absent fields read as null.
    pub fn matches(&self, fields: &BTreeMap<String, Value>) -> bool {
        let v = fields.get(&self.field).unwrap_or(&Value::Null);
        let text = || v.as_text().map(str::to_lowercase);
        match &self.op {
            Op::Equals(x) => v == x,
            Op::TextEquals(s) => text().is_some_and(|t| t == s.to_lowercase()),
            Op::Contains(s) => text().is_some_and(|t| t.contains(&s.to_lowercase())),
            Op::StartsWith(s) => text().is_some_and(|t| t.starts_with(&s.to_lowercase())),
            Op::EndsWith(s) => text().is_some_and(|t| t.ends_with(&s.to_lowercase())),
            Op::Like(p) => text().is_some_and(|t| glob_match(&p.to_lowercase(), &t)),
            Op::InSet(xs) => xs.contains(v),
            Op::LessThan(x) => !v.is_null() && same_kind(v, x) && v.sort_cmp(x).is_lt(),
            Op::GreaterOrEqual(x) => !v.is_null() && same_kind(v, x) && v.sort_cmp(x).is_ge(),
            Op::IsNull => v.is_null(),
        }
    }
}

fn same_kind(a: &Value, b: &Value) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// `*`-only glob over already-lowercased text.
fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if text.len() < first.len() + last.len() || !text.starts_with(first) || !text.ends_with(last)
    {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

#[derive(Debug, Clone, Default)]
pub struct Select {
    pub entity: String,
    pub criteria: Vec<Criterion>,
    pub order: Option<String>,
    pub offset: usize,
    pub limit: Option<usize>,
}

impl Select {
    pub fn from(entity: impl Into<String>) -> Self {
        Select {
            entity: entity.into(),
            ..Default::default()
        }
    }

    pub fn filter(mut self, c: Criterion) -> Self {
        self.criteria.push(c);
        self
    }

    pub fn order_by(mut self, field: impl Into<String>) -> Self {
        self.order = Some(field.into());
        self
    }

    pub fn page(mut self, offset: usize, limit: usize) -> Self {
        self.offset = offset;
        self.limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub offset: usize,
    pub total: usize,
}

impl<T> Page<T> {
    /// Slices an already filtered and ordered list.
    pub fn slice(all: Vec<T>, offset: usize, limit: Option<usize>) -> Self {
        let total = all.len();
        let offset = offset.min(total);
        let items = all
            .into_iter()
            .skip(offset)
            .take(limit.unwrap_or(usize::MAX))
            .collect();
        Page {
            items,
            offset,
            total,
        }
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Page<U> {
        Page {
            items: self.items.into_iter().map(f).collect(),
            offset: self.offset,
            total: self.total,
        }
    }
}

/// Reference to a row id inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Id(EntityId),
    /// Id assigned by the insert at this position of the same batch.
    Inserted(usize),
}

impl From<EntityId> for Target {
    fn from(id: EntityId) -> Self {
        Target::Id(id)
    }
}

/// A field value in a mutation.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Value(Value),
    Inserted(usize),
}

impl<T: Into<Value>> From<T> for Input {
    fn from(v: T) -> Self {
        Input::Value(v.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    Insert,
    Update,
    Delete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub kind: MutationKind,
    pub entity: String,
    pub id: Option<Target>,
    pub values: BTreeMap<String, Input>,
    /// Row version the caller read; a later committed write yields `Conflict`.
    pub expected_version: Option<u64>,
}

impl Mutation {
    pub fn insert(entity: &str) -> Self {
        Self::new(MutationKind::Insert, entity, None)
    }

    /// Insert of an extension row sharing the key of `parent`.
    pub fn insert_ext(entity: &str, parent: impl Into<Target>) -> Self {
        Self::new(MutationKind::Insert, entity, Some(parent.into()))
    }

    pub fn update(entity: &str, id: impl Into<Target>) -> Self {
        Self::new(MutationKind::Update, entity, Some(id.into()))
    }

    pub fn delete(entity: &str, id: impl Into<Target>) -> Self {
        Self::new(MutationKind::Delete, entity, Some(id.into()))
    }

    fn new(kind: MutationKind, entity: &str, id: Option<Target>) -> Self {
        Mutation {
            kind,
            entity: entity.to_string(),
            id,
            values: BTreeMap::new(),
            expected_version: None,
        }
    }

    pub fn set(mut self, field: &str, v: impl Into<Input>) -> Self {
        self.values.insert(field.to_string(), v.into());
        self
    }

    pub fn set_ref(mut self, field: &str, position: usize) -> Self {
        self.values
            .insert(field.to_string(), Input::Inserted(position));
        self
    }

    pub fn set_all(mut self, values: impl IntoIterator<Item = (String, Value)>) -> Self {
        for (k, v) in values {
            self.values.insert(k, Input::Value(v));
        }
        self
    }

    pub fn expect_version(mut self, v: u64) -> Self {
        self.expected_version = Some(v);
        self
    }
}

/// Storage contract shared by every backend.
pub trait Gateway: Send + Sync {
    /// Records satisfying all criteria, ordered by `order` then id.
    fn select(&self, query: &Select) -> Result<Page<Arc<Row>>>;

    fn get(&self, entity: &str, id: EntityId) -> Result<Option<Arc<Row>>>;

    /// Applies the batch atomically; returns the ids assigned to inserts, in order.
    fn apply(&self, batch: Vec<Mutation>) -> Result<Vec<EntityId>>;

    /// Replaces the store content with a JSON fixture document.
    fn load_seed_str(&self, json: &str) -> Result<SeedSummary>;

    /// Canonical serialized state, byte-comparable across calls.
    fn snapshot(&self) -> Vec<u8>;

    /// Row count per entity kind.
    fn counts(&self) -> BTreeMap<String, usize>;

    /// Increases with every committed batch or seed load.
    fn revision(&self) -> u64;

    fn backend_name(&self) -> &'static str;

    fn load_seed(&self, path: &Path) -> Result<SeedSummary> {
        let text = std::fs::read_to_string(path)?;
        self.load_seed_str(&text)
    }

    /// All rows matching `criteria`, unpaged.
    fn scan(&self, entity: &str, criteria: Vec<Criterion>) -> Result<Vec<Arc<Row>>> {
        let q = Select {
            entity: entity.to_string(),
            criteria,
            ..Default::default()
        };
        Ok(self.select(&q)?.items)
    }

    /// Like [`Gateway::get`] but a missing row is an error.
    fn fetch(&self, entity: &str, id: EntityId) -> Result<Arc<Row>> {
        self.get(entity, id)?
            .ok_or_else(|| Error::not_found(entity, id.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn glob() {
        assert!(glob_match("chair*", "chair"));
        assert!(glob_match("chair*", "chairs"));
        assert!(!glob_match("chair*", "armchair"));
        assert!(glob_match("*chair", "armchair"));
        assert!(glob_match("*a*b*", "xxaxxbxx"));
        assert!(!glob_match("*b*a*", "ab"));
        assert!(glob_match("a*a", "aa"));
        assert!(!glob_match("a*a", "a"));
        assert!(glob_match("*", ""));
    }

    #[test]
    fn text_ops_ignore_case() {
        let r = row(&[("Type", Value::from("Plastic Classroom Chair"))]);
        assert!(Criterion::new("Type", Op::TextEquals("plastic classroom chair".into())).matches(&r));
        assert!(Criterion::contains("Type", "CLASSROOM").matches(&r));
        assert!(Criterion::new("Type", Op::Like("p*chair".into())).matches(&r));
        assert!(!Criterion::eq("Type", "plastic classroom chair").matches(&r));
    }

    #[test]
    fn ranges_skip_nulls_and_mixed_kinds() {
        let r = row(&[("n", Value::Int(5)), ("t", Value::from("x"))]);
        assert!(Criterion::new("n", Op::LessThan(Value::Int(6))).matches(&r));
        assert!(!Criterion::new("n", Op::LessThan(Value::Int(5))).matches(&r));
        assert!(Criterion::new("n", Op::GreaterOrEqual(Value::Int(5))).matches(&r));
        assert!(!Criterion::new("t", Op::LessThan(Value::Int(9))).matches(&r));
        assert!(!Criterion::new("missing", Op::GreaterOrEqual(Value::Int(0))).matches(&r));
        assert!(Criterion::is_null("missing").matches(&r));
    }

    #[test]
    fn page_slice_clamps_offset() {
        let p = Page::slice(vec![1, 2, 3], 5, Some(2));
        assert_eq!(p.offset, 3);
        assert_eq!(p.total, 3);
        assert!(p.items.is_empty());
        let p = Page::slice(vec![1, 2, 3], 1, Some(1));
        assert_eq!(p.items, vec![2]);
    }
}
