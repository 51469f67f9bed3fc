#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use reqwest::blocking::Client as Http;
use reqwest::header::{COOKIE, SET_COOKIE};
use reqwest::Method;
use serde_json::{json, Value as J};
use tempfile::TempDir;
use uuis_core::auth::AuthConfig;
use uuis_core::clock::SystemClock;
use uuis_core::storage::{FileStore, Gateway, MemoryStore};
use uuis_core::Uuis;

pub fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// A running server over one store. The store handle stays with the test
/// only so oracles can read raw rows; every operation goes over HTTP.
pub struct Server {
    pub base: String,
    pub store: Arc<dyn Gateway>,
    pub outbox: PathBuf,
    pub backend: &'static str,
    _dir: TempDir,
}

pub const BACKENDS: [&str; 2] = ["memory", "file"];

impl Server {
    /// Starts a server whose store is filled by `seed`.
    pub fn start(backend: &'static str, seed: impl FnOnce(&Uuis)) -> Server {
        let dir = tempfile::tempdir().unwrap();
        let store: Arc<dyn Gateway> = match backend {
            "memory" => Arc::new(MemoryStore::new()),
            "file" => Arc::new(FileStore::open(dir.path().join("store.json")).unwrap()),
            other => panic!("unknown backend {other}"),
        };
        let outbox = dir.path().join("outbox.jsonl");
        let cfg = AuthConfig {
            outbox: outbox.clone(),
            ..AuthConfig::default()
        };
        let u = Uuis::new(store.clone(), Arc::new(SystemClock), cfg);
        seed(&u);
        u.locations.load_search_config(&repo_path("conf/locations.conf")).unwrap();
        let u = Arc::new(u);
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(l.local_addr().unwrap()).unwrap();
                axum::serve(l, uuis_server::router(u)).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        Server {
            base: format!("http://{addr}"),
            store,
            outbox,
            backend,
            _dir: dir,
        }
    }

    pub fn demo(backend: &'static str) -> Server {
        Server::start(backend, |u| {
            u.seed(&repo_path("fixtures/demo.json")).unwrap();
        })
    }

    pub fn generated(backend: &'static str, seed: u64) -> Server {
        Server::start(backend, |u| {
            let doc = uuis_core::fixture::generate(seed, Default::default());
            u.seed_str(&doc.to_string()).unwrap();
        })
    }

    pub fn anon(&self) -> Client {
        Client {
            http: Http::new(),
            base: self.base.clone(),
            cookie: None,
        }
    }

    /// Signs in; users in several departments take the first offered one.
    pub fn login(&self, user: &str, pass: &str) -> Client {
        self.login_in(user, pass, None)
    }

    pub fn login_in(&self, user: &str, pass: &str, department: Option<i64>) -> Client {
        let mut c = self.anon();
        let r = c.post("/auth/login", json!({"UserName": user, "Password": pass}));
        assert_eq!(r.status, 200, "login {user}: {}", r.body);
        if r.body["status"] == "choose-department" {
            let d = department.unwrap_or_else(|| r.body["departments"][0]["DepartmentID"].as_i64().unwrap());
            let r = c.post(
                "/auth/choose-department",
                json!({"pending_token": r.body["pending_token"], "DepartmentID": d}),
            );
            assert_eq!(r.status, 200, "{}", r.body);
        }
        assert!(c.cookie.is_some());
        c
    }

    pub fn admin(&self) -> Client {
        self.login("a_khan", "wemooki")
    }

    pub fn counts(&self) -> std::collections::BTreeMap<String, usize> {
        self.store.counts()
    }

    pub fn snapshot(&self) -> Vec<u8> {
        self.store.snapshot()
    }
}

#[derive(Debug, Clone)]
pub struct Resp {
    pub status: u16,
    pub body: J,
    pub text: String,
}

impl Resp {
    pub fn code(&self) -> &str {
        self.body["code"].as_str().unwrap_or("")
    }

    pub fn message(&self) -> &str {
        self.body["message"].as_str().unwrap_or("")
    }

    pub fn ok(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn ids(&self, key: &str) -> Vec<i64> {
        self.body["items"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v[key].as_i64()).collect())
            .unwrap_or_default()
    }
}

/// Plain HTTP client holding one session cookie.
pub struct Client {
    http: Http,
    pub base: String,
    pub cookie: Option<String>,
}

impl Client {
    pub fn send(&mut self, method: Method, path: &str, body: Option<J>) -> Resp {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(c) = &self.cookie {
            req = req.header(COOKIE, c);
        }
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        let r = req.send().expect("server reachable");
        if let Some(sc) = r.headers().get(SET_COOKIE).and_then(|v| v.to_str().ok()) {
            let pair = sc.split(';').next().unwrap_or_default().to_string();
            let cleared = sc.contains("Max-Age=0");
            self.cookie = (!cleared).then_some(pair);
        }
        let status = r.status().as_u16();
        let text = r.text().unwrap_or_default();
        let body = serde_json::from_str(&text).unwrap_or(J::Null);
        Resp { status, body, text }
    }

    pub fn get(&mut self, path: &str) -> Resp {
        self.send(Method::GET, path, None)
    }

    pub fn post(&mut self, path: &str, body: J) -> Resp {
        self.send(Method::POST, path, Some(body))
    }

    pub fn put(&mut self, path: &str, body: J) -> Resp {
        self.send(Method::PUT, path, Some(body))
    }

    pub fn delete(&mut self, path: &str) -> Resp {
        self.send(Method::DELETE, path, None)
    }

    pub fn menu_names(&mut self) -> Vec<String> {
        let r = self.get("/menu");
        r.body["menu"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["MenuName"].as_str().unwrap().to_string())
            .collect()
    }
}

/// Percent-encodes a query component.
pub fn enc(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

pub fn qs(pairs: &[(&str, &str)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{}={}", enc(k), enc(v)))
        .collect::<Vec<_>>()
        .join("&")
}
