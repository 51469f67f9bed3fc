use std::collections::BTreeMap;
use std::sync::Arc;

use super::engine::{Engine, State};
use super::{seed, EntityId, Gateway, Mutation, Page, Row, Schema, SeedSummary, Select};
use crate::error::Result;

/// Volatile store; state lives only as long as the value.
pub struct MemoryStore {
    engine: Engine,
}

impl MemoryStore {
    pub fn new() -> Self {
        MemoryStore {
            engine: Engine::new(State::empty()),
        }
    }
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway for MemoryStore {
    fn select(&self, query: &Select) -> Result<Page<Arc<Row>>> {
        self.engine.read().select(query)
    }

    fn get(&self, entity: &str, id: EntityId) -> Result<Option<Arc<Row>>> {
        let def = Schema::global().entity(entity)?;
        Ok(self.engine.read().table(def.name).get(&id.0).cloned())
    }

    fn apply(&self, batch: Vec<Mutation>) -> Result<Vec<EntityId>> {
        self.engine
            .commit(|s| s.apply(batch, false), |_| Ok(()))
    }

    fn load_seed_str(&self, json: &str) -> Result<SeedSummary> {
        let (fresh, summary) = seed::load(json)?;
        self.engine.commit(
            |s| {
                *s = fresh;
                Ok(())
            },
            |_| Ok(()),
        )?;
        Ok(summary)
    }

    fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&self.engine.read().to_document()).expect("serializable")
    }

    fn counts(&self) -> BTreeMap<String, usize> {
        self.engine.read().counts()
    }

    fn revision(&self) -> u64 {
        self.engine.revision()
    }

    fn backend_name(&self) -> &'static str {
        "memory"
    }
}
