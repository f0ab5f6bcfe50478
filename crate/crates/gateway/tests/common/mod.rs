#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use medforge_core::store::{Clock, FileBackend, SystemClock};
use medforge_core::{parse_profile, PatientProfile, Store, TemplateSet};
use medforge_gateway::api::{router, AppState};
use medforge_gateway::auth::{Credential, CredentialSet, Role, Sessions};
use medforge_gateway::webhook::Webhook;
use parking_lot::Mutex;
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

pub const SYS: &str = "00215062000112sys";
pub const DIA: &str = "00215062000112dia";
pub const TIME: &str = "00215062000112time";

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn bp_profile() -> PatientProfile {
    parse_profile(&fixture("blood-pressure.xml")).unwrap()
}

pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new() -> Arc<ManualClock> {
        Arc::new(ManualClock(Mutex::new(Utc.with_ymd_and_hms(2026, 10, 16, 8, 0, 0).unwrap())))
    }

    pub fn advance(&self, d: chrono::Duration) {
        *self.0.lock() += d;
    }

    pub fn rfc3339(&self) -> String {
        self.now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

/// Principals every test server knows, with their passwords.
pub const USERS: [(&str, Role, &str); 5] = [
    ("p1", Role::Patient, "p1-secret"),
    ("p2", Role::Patient, "p2-secret"),
    ("doc1", Role::Doctor, "doc-secret"),
    ("cuff@p1", Role::Device, "cuff-secret"),
    ("p3", Role::Patient, "p3-secret"),
];

pub fn password_of(principal: &str) -> &'static str {
    USERS.iter().find(|u| u.0 == principal).unwrap().2
}

pub fn credentials() -> CredentialSet {
    let mut set = CredentialSet::default();
    for (p, role, pw) in USERS {
        set.insert(Credential::new(p, role, pw));
    }
    set
}

pub struct TestServer {
    pub base: String,
    pub store: Arc<Store>,
    pub dir: Arc<tempfile::TempDir>,
    task: tokio::task::JoinHandle<()>,
    http: reqwest::Client,
}

pub struct Options {
    pub clock: Arc<dyn Clock>,
    pub session_ttl: chrono::Duration,
    pub webhook: Option<Webhook>,
    pub dir: Option<Arc<tempfile::TempDir>>,
}

impl Default for Options {
    fn default() -> Options {
        Options { clock: Arc::new(SystemClock), session_ttl: chrono::Duration::hours(1), webhook: None, dir: None }
    }
}

impl TestServer {
    /// p1 and p2 get the blood-pressure profile; p3 has none.
    pub async fn start() -> TestServer {
        TestServer::start_with(Options::default()).await
    }

    pub async fn start_with(opts: Options) -> TestServer {
        let fresh = opts.dir.is_none();
        let dir = opts.dir.unwrap_or_else(|| Arc::new(tempfile::tempdir().unwrap()));
        let backend = Arc::new(FileBackend::new(dir.path()).unwrap());
        let store = Arc::new(Store::open(backend, opts.clock.clone()).unwrap());
        if fresh {
            for p in ["p1", "p2"] {
                store.store_profile(p, &bp_profile(), 0).unwrap();
            }
        }
        let sessions = Sessions::new(opts.session_ttl, opts.clock);
        let state =
            AppState::new(store.clone(), Arc::new(TemplateSet::builtin()), credentials(), sessions, opts.webhook);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let task = tokio::spawn(async move {
            axum::serve(listener, router(Arc::new(state))).await.unwrap();
        });
        TestServer { base, store, dir, task, http: reqwest::Client::new() }
    }

    pub fn stop(self) -> Arc<tempfile::TempDir> {
        self.task.abort();
        self.dir
    }

    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Body>) -> Reply {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        req = match body {
            Some(Body::Json(v)) => req.header("content-type", "application/json").body(v.to_string()),
            Some(Body::Raw(s)) => req.body(s),
            None => req,
        };
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let version = resp.headers().get("x-profile-version").map(|v| v.to_str().unwrap().parse().unwrap());
        let content_type = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
        let text = resp.text().await.unwrap();
        Reply { status, version, content_type, text }
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.call(Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> Reply {
        self.call(Method::POST, path, Some(token), Some(Body::Json(body))).await
    }

    pub async fn try_login(&self, principal: &str, password: &str) -> Reply {
        self.call(
            Method::POST,
            "/api/login",
            None,
            Some(Body::Json(json!({"principal": principal, "password": password}))),
        )
        .await
    }

    pub async fn login(&self, principal: &str) -> String {
        let r = self.try_login(principal, password_of(principal)).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        r.json()["token"].as_str().unwrap().to_string()
    }
}

pub enum Body {
    Json(Value),
    Raw(String),
}

#[derive(Debug)]
pub struct Reply {
    pub status: StatusCode,
    pub version: Option<u64>,
    pub content_type: Option<String>,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

pub fn submission(patient: &str, time: &str, sys: &str, dia: &str) -> Value {
    json!({
        "patient_id": patient,
        "period": "morning",
        "client_timestamp": "2026-10-16T08:00:00+02:00",
        "values": { TIME: time, SYS: sys, DIA: dia },
    })
}
