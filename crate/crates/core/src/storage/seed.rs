//! JSON fixture loading.
//!
//! A fixture is one object mapping entity kind to an array of rows; each
//! row maps column name to value, foreign keys by integer id. Rows of
//! generated-key kinds may omit their key.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value as J;

use super::engine::State;
use super::schema::{KeyMode, Schema};
use super::{EntityId, Input, Mutation, MutationKind};
use crate::error::{Error, Result};

/// Rows loaded per entity kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SeedSummary {
    pub counts: BTreeMap<String, usize>,
}

impl SeedSummary {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

fn parse_document(text: &str) -> Result<serde_json::Map<String, J>> {
    let doc: J = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        reason: e.to_string(),
    })?;
    match doc {
        J::Object(m) => Ok(m),
        _ => Err(Error::Parse {
            line: 1,
            reason: "top level must be an object of entity kinds".into(),
        }),
    }
}

/// Builds a fresh state from fixture text.
pub(crate) fn load(text: &str) -> Result<(State, SeedSummary)> {
    let doc = parse_document(text)?;
    load_tables(&doc)
}

/// Reads a file-store document: `{"next_ids": .., "tables": <fixture>}`.
pub(crate) fn load_store_document(text: &str) -> Result<State> {
    let doc = parse_document(text)?;
    let tables = match doc.get("tables") {
        Some(J::Object(t)) => t,
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: "store document lacks a tables object".into(),
            })
        }
    };
    let (mut state, _) = load_tables(tables)?;
    if let Some(ids) = doc.get("next_ids") {
        let ids: BTreeMap<String, i64> =
            serde_json::from_value(ids.clone()).map_err(|e| Error::Parse {
                line: 1,
                reason: e.to_string(),
            })?;
        state.set_next_ids(&ids);
    }
    Ok(state)
}

fn load_tables(doc: &serde_json::Map<String, J>) -> Result<(State, SeedSummary)> {
    let schema = Schema::global();
    for kind in doc.keys() {
        schema.entity(kind)?;
    }
    let mut state = State::empty();
    let mut summary = SeedSummary::default();
    for def in schema.entities() {
        let rows = match doc.get(def.name) {
            None => &[][..],
            Some(J::Array(rows)) => rows.as_slice(),
            Some(_) => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("{} must be an array of rows", def.name),
                })
            }
        };
        for (i, row) in rows.iter().enumerate() {
            let at = |e: Error| match e {
                Error::ConstraintViolation(m) => {
                    Error::ConstraintViolation(format!("{}[{i}]: {m}", def.name))
                }
                Error::UniqueViolation { .. } | Error::FieldTooLong { .. } => {
                    Error::ConstraintViolation(format!("{}[{i}]: {e}", def.name))
                }
                other => other,
            };
            let obj = row.as_object().ok_or_else(|| {
                Error::ConstraintViolation(format!("{}[{i}]: row must be an object", def.name))
            })?;
            let mut id = None;
            let mut values = BTreeMap::new();
            for (col, raw) in obj {
                let f = def.require_field(col)?;
                let v = f.ty.decode(col, raw).map_err(at)?;
                if col == def.key {
                    id = v.as_int().map(EntityId);
                } else {
                    values.insert(col.clone(), Input::Value(v));
                }
            }
            if id.is_none() && matches!(def.key_mode, KeyMode::SharedWith(_)) {
                return Err(Error::ConstraintViolation(format!(
                    "{}[{i}]: missing {}",
                    def.name, def.key
                )));
            }
            let m = Mutation {
                kind: MutationKind::Insert,
                entity: def.name.to_string(),
                id: id.map(Into::into),
                values,
                expected_version: None,
            };
            state.apply(vec![m], true).map_err(at)?;
        }
        summary.counts.insert(def.name.to_string(), rows.len());
    }
    Ok((state, summary))
}
