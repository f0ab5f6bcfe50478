//! Credentials, password hashing and bearer-token sessions.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Duration, Utc};
use medforge_core::store::Clock;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Patient,
    Doctor,
    /// An automatic acquisition device. Its principal has the form
    /// `<device>@<patient>` and it may only submit for that patient.
    Device,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Doctor => "doctor",
            Role::Device => "device",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Role, String> {
        match s {
            "patient" => Ok(Role::Patient),
            "doctor" => Ok(Role::Doctor),
            "device" => Ok(Role::Device),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CredentialError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate principal `{principal}`")]
    Duplicate { line: usize, principal: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One `principal:role:salt:hash` entry. Salt and hash are lowercase hex;
/// the hash is SHA-256 over the salt bytes followed by the UTF-8 password.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    pub principal: String,
    pub role: Role,
    salt: Vec<u8>,
    hash: [u8; 32],
}

pub fn hash_password(salt: &[u8], password: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().into()
}

impl Credential {
    /// Builds a credential with a fresh random 16-byte salt.
    pub fn new(principal: &str, role: Role, password: &str) -> Credential {
        let mut salt = vec![0u8; 16];
        rand::fill(&mut salt[..]);
        let hash = hash_password(&salt, password);
        Credential { principal: principal.to_string(), role, salt, hash }
    }

    pub fn verify(&self, password: &str) -> bool {
        hash_password(&self.salt, password).ct_eq(&self.hash).into()
    }

    pub fn to_line(&self) -> String {
        format!("{}:{}:{}:{}", self.principal, self.role, hex::encode(&self.salt), hex::encode(self.hash))
    }

    /// The patient this principal acts for, if any.
    pub fn patient(&self) -> Option<&str> {
        patient_of(&self.principal, self.role)
    }
}

fn patient_of(principal: &str, role: Role) -> Option<&str> {
    match role {
        Role::Patient => Some(principal),
        Role::Device => principal.rsplit_once('@').map(|(_, p)| p),
        Role::Doctor => None,
    }
}

#[derive(Debug, Default, Clone)]
pub struct CredentialSet {
    by_principal: HashMap<String, Credential>,
}

impl CredentialSet {
    pub fn parse(text: &str) -> Result<CredentialSet, CredentialError> {
        let mut set = CredentialSet::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| CredentialError::Syntax { line, message: message.to_string() };
            let fields: Vec<&str> = trimmed.split(':').collect();
            let [principal, role, salt, hash] = fields[..] else {
                return Err(syntax("expected principal:role:salt:hash"));
            };
            if principal.is_empty() {
                return Err(syntax("empty principal"));
            }
            let role: Role = role.parse().map_err(|e: String| syntax(&e))?;
            if role == Role::Device && patient_of(principal, role).is_none_or(str::is_empty) {
                return Err(syntax("device principals must look like <device>@<patient>"));
            }
            let salt = hex::decode(salt).map_err(|_| syntax("salt is not hex"))?;
            let hash: [u8; 32] = hex::decode(hash)
                .ok()
                .and_then(|h| h.try_into().ok())
                .ok_or_else(|| syntax("hash is not 64 hex digits"))?;
            let cred = Credential { principal: principal.to_string(), role, salt, hash };
            if set.by_principal.insert(principal.to_string(), cred).is_some() {
                return Err(CredentialError::Duplicate { line, principal: principal.to_string() });
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<CredentialSet, CredentialError> {
        CredentialSet::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, cred: Credential) {
        self.by_principal.insert(cred.principal.clone(), cred);
    }

    pub fn len(&self) -> usize {
        self.by_principal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_principal.is_empty()
    }

    /// Checks a login. Unknown principals still pay for one hash and
    /// comparison so the two failure cases take the same time.
    pub fn authenticate(&self, principal: &str, password: &str) -> Option<&Credential> {
        match self.by_principal.get(principal) {
            Some(cred) if cred.verify(password) => Some(cred),
            Some(_) => None,
            None => {
                let _ = bool::from(hash_password(&[0; 16], password).ct_eq(&[0; 32]));
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub principal: String,
    pub role: Role,
    pub expires_at: DateTime<Utc>,
}

impl Session {
    pub fn patient(&self) -> Option<&str> {
        patient_of(&self.principal, self.role)
    }
}

/// In-memory bearer tokens. Restarting the service drops every session.
pub struct Sessions {
    ttl: Duration,
    clock: Arc<dyn Clock>,
    live: Mutex<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> Sessions {
        Sessions { ttl, clock, live: Mutex::new(HashMap::new()) }
    }

    pub fn issue(&self, cred: &Credential) -> Session {
        let mut raw = [0u8; 16];
        rand::fill(&mut raw);
        let now = self.clock.now();
        let session = Session {
            token: URL_SAFE_NO_PAD.encode(raw),
            principal: cred.principal.clone(),
            role: cred.role,
            expires_at: now + self.ttl,
        };
        let mut live = self.live.lock();
        live.retain(|_, s| s.expires_at > now);
        live.insert(session.token.clone(), session.clone());
        session
    }

    pub fn resolve(&self, token: &str) -> Option<Session> {
        let now = self.clock.now();
        let mut live = self.live.lock();
        match live.get(token) {
            Some(s) if s.expires_at > now => Some(s.clone()),
            Some(_) => {
                live.remove(token);
                None
            }
            None => None,
        }
    }
}
