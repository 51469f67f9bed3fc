#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use tempfile::TempDir;
use uuis_core::auth::LoginOutcome;
use uuis_core::fixture::{self, Shape};
use uuis_core::session::Session;
use uuis_core::storage::{FileStore, Gateway, MemoryStore};
use uuis_core::Uuis;

pub fn demo_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/demo.json"))
}

/// A store plus whatever keeps its backing file alive.
pub struct Backend {
    pub name: &'static str,
    pub store: Arc<dyn Gateway>,
    _dir: Option<TempDir>,
}

pub fn backends() -> Vec<Backend> {
    let dir = tempfile::tempdir().unwrap();
    let file = FileStore::open(dir.path().join("store.json")).unwrap();
    vec![
        Backend {
            name: "memory",
            store: Arc::new(MemoryStore::new()),
            _dir: None,
        },
        Backend {
            name: "file",
            store: Arc::new(file),
            _dir: Some(dir),
        },
    ]
}

pub fn demo_on(b: &Backend) -> Uuis {
    let u = Uuis::with_defaults(b.store.clone());
    u.seed(&demo_path()).unwrap();
    u
}

pub fn demo() -> Uuis {
    let u = Uuis::with_defaults(Arc::new(MemoryStore::new()));
    u.seed(&demo_path()).unwrap();
    u
}

pub fn generated_on(store: Arc<dyn Gateway>, seed: u64) -> Uuis {
    let u = Uuis::with_defaults(store);
    let doc = fixture::generate(seed, Shape::default());
    u.seed_str(&doc.to_string()).unwrap();
    u
}

/// Signs in, picking the first offered department when asked.
pub fn login(u: &Uuis, name: &str, pass: &str) -> Session {
    match u.auth.login(name, pass).unwrap() {
        LoginOutcome::Session(s) => s,
        LoginOutcome::Pending {
            pending_token,
            departments,
        } => u
            .auth
            .choose_department(&pending_token, departments[0].id)
            .unwrap(),
    }
}

pub fn admin(u: &Uuis) -> Session {
    login(u, "a_khan", "wemooki")
}
