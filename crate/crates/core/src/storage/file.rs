use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::engine::{Engine, State};
use super::{seed, EntityId, Gateway, Mutation, Page, Row, Schema, SeedSummary, Select};
use crate::error::Result;

/// Durable store kept in one JSON document.
///
/// Every committed batch rewrites the file through a temporary sibling and
/// an atomic rename, so a crash leaves either the old or the new content.
pub struct FileStore {
    engine: Engine,
    path: PathBuf,
}

impl FileStore {
    /// Opens `path`, creating an empty store if the file does not exist.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let state = if path.exists() {
            seed::load_store_document(&fs::read_to_string(&path)?)?
        } else {
            let s = State::empty();
            write_document(&path, &s)?;
            s
        };
        Ok(FileStore {
            engine: Engine::new(state),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn write_document(path: &Path, state: &State) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let body = serde_json::to_vec_pretty(&state.to_document()).expect("serializable");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&body)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Gateway for FileStore {
    fn select(&self, query: &Select) -> Result<Page<Arc<Row>>> {
        self.engine.read().select(query)
    }

    fn get(&self, entity: &str, id: EntityId) -> Result<Option<Arc<Row>>> {
        let def = Schema::global().entity(entity)?;
        Ok(self.engine.read().table(def.name).get(&id.0).cloned())
    }

    fn apply(&self, batch: Vec<Mutation>) -> Result<Vec<EntityId>> {
        self.engine
            .commit(|s| s.apply(batch, false), |s| write_document(&self.path, s))
    }

    fn load_seed_str(&self, json: &str) -> Result<SeedSummary> {
        let (fresh, summary) = seed::load(json)?;
        self.engine.commit(
            |s| {
                *s = fresh;
                Ok(())
            },
            |s| write_document(&self.path, s),
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
        "file"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::Mutation;

    #[test]
    fn survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        {
            let s = FileStore::open(&path).unwrap();
            s.apply(vec![Mutation::insert("Faculty").set("FacultyName", "ENCS")])
                .unwrap();
        }
        let s = FileStore::open(&path).unwrap();
        let row = s.fetch("Faculty", EntityId(1)).unwrap();
        assert_eq!(row.str("FacultyName"), "ENCS");
        let id = s
            .apply(vec![Mutation::insert("Faculty").set("FacultyName", "Arts")])
            .unwrap();
        assert_eq!(id, vec![EntityId(2)]);
    }

    #[test]
    fn failed_batch_leaves_file_alone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let s = FileStore::open(&path).unwrap();
        s.apply(vec![Mutation::insert("Faculty").set("FacultyName", "ENCS")])
            .unwrap();
        let before = fs::read(&path).unwrap();
        let err = s.apply(vec![
            Mutation::insert("Faculty").set("FacultyName", "Arts"),
            Mutation::delete("Faculty", EntityId(40)),
        ]);
        assert!(err.is_err());
        assert_eq!(fs::read(&path).unwrap(), before);
    }
}
