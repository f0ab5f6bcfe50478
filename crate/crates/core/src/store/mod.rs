//! Append-only record, alert and profile storage with replay on open.
//!
//! Writes for one patient are serialized by a per-patient mutex held across
//! the backend I/O. Readers only take a short in-memory read lock, so they
//! never wait for disk.

mod backend;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, FileBackend, MemoryBackend, Stream};

use crate::model::PatientProfile;
use crate::profile_io::{
    has_errors, is_valid_patient_id, parse_profile, serialize_profile, validate_profile, ValidationError,
};
use crate::scalar::Scalar;
use crate::validation::{BoundFinding, FindingKind, Period, RecordDraft};

/// Time source, replaceable in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// One stored, immutable data-entry event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub record_id: u64,
    pub patient_id: String,
    pub period: Period,
    pub server_timestamp: DateTime<Utc>,
    pub client_timestamp: String,
    pub values: BTreeMap<String, Scalar>,
    pub profile_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submission_nonce: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    BoundMax,
    BoundMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertSeverity {
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: u64,
    pub patient_id: String,
    pub record_id: u64,
    pub value_id: String,
    pub kind: AlertKind,
    pub severity: AlertSeverity,
    pub message: String,
    pub limit: Scalar,
    pub observed: Scalar,
    pub excess: f64,
    pub server_timestamp: DateTime<Utc>,
    pub acknowledged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct AckLine {
    alert_id: u64,
    server_timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlertFilter {
    pub patient: Option<String>,
    /// Inclusive lower bound on `server_timestamp`.
    pub since: Option<DateTime<Utc>>,
    pub unacknowledged_only: bool,
}

impl AlertFilter {
    pub fn matches(&self, alert: &Alert) -> bool {
        self.patient.as_ref().is_none_or(|p| *p == alert.patient_id)
            && self.since.is_none_or(|t| alert.server_timestamp >= t)
            && !(self.unacknowledged_only && alert.acknowledged)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown patient `{0}`")]
    NotFound(String),
    #[error("unknown alert {0}")]
    UnknownAlert(u64),
    #[error("invalid patient id `{0}`")]
    BadPatientId(String),
    #[error("profile version conflict: expected {expected}, current {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
    #[error("corrupt store file {file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

/// Outcome of [`Store::commit_submission`].
#[derive(Debug, Clone, PartialEq)]
pub struct Committed {
    pub record: SubmissionRecord,
    pub alerts: Vec<Alert>,
    /// True when the nonce matched an earlier submission and nothing was
    /// written.
    pub replayed: bool,
}

#[derive(Debug, Default)]
struct PatientState {
    /// `profiles[i]` has version `i + 1`.
    profiles: Vec<Arc<PatientProfile>>,
    records: Vec<Arc<SubmissionRecord>>,
    alerts: Vec<Alert>,
    /// nonce -> record id
    nonces: HashMap<String, u64>,
}

impl PatientState {
    fn current_version(&self) -> u64 {
        self.profiles.len() as u64
    }

    fn record(&self, id: u64) -> Option<&Arc<SubmissionRecord>> {
        // ids are 1..=n in order
        id.checked_sub(1).and_then(|i| self.records.get(i as usize))
    }

    fn alerts_of(&self, record_id: u64) -> Vec<Alert> {
        self.alerts.iter().filter(|a| a.record_id == record_id).cloned().collect()
    }
}

#[derive(Debug, Default)]
struct PatientSlot {
    write: Mutex<()>,
    state: RwLock<PatientState>,
}

pub struct Store {
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    nonce_ttl: Duration,
    patients: RwLock<BTreeMap<String, Arc<PatientSlot>>>,
    /// alert id -> owning patient
    alert_owner: RwLock<HashMap<u64, String>>,
    next_alert_id: AtomicU64,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("patients", &self.patients.read().len()).finish_non_exhaustive()
    }
}

pub const DEFAULT_NONCE_TTL: Duration = Duration::from_secs(24 * 60 * 60);

fn corrupt(patient: &str, file: &str, line: usize, message: impl ToString) -> StoreError {
    StoreError::Corrupt { file: format!("{patient}/{file}"), line, message: message.to_string() }
}

impl Store {
    /// Opens a store over `backend`, replaying everything it holds.
    pub fn open(backend: Arc<dyn Backend>, clock: Arc<dyn Clock>) -> Result<Store, StoreError> {
        let store = Store {
            backend,
            clock,
            nonce_ttl: DEFAULT_NONCE_TTL,
            patients: RwLock::new(BTreeMap::new()),
            alert_owner: RwLock::new(HashMap::new()),
            next_alert_id: AtomicU64::new(1),
        };
        store.replay()?;
        Ok(store)
    }

    pub fn open_dir(root: impl Into<std::path::PathBuf>) -> Result<Store, StoreError> {
        Store::open(Arc::new(FileBackend::new(root)?), Arc::new(SystemClock))
    }

    pub fn in_memory() -> Store {
        Store::open(Arc::new(MemoryBackend::new()), Arc::new(SystemClock)).expect("empty memory store replays")
    }

    pub fn with_nonce_ttl(mut self, ttl: Duration) -> Store {
        self.nonce_ttl = ttl;
        self
    }

    fn replay(&self) -> Result<(), StoreError> {
        let mut max_alert = 0;
        for patient in self.backend.patients()? {
            let mut state = PatientState::default();
            for (i, version) in self.backend.profile_versions(&patient)?.into_iter().enumerate() {
                let file = format!("profile.v{version}.xml");
                if version != i as u64 + 1 {
                    return Err(corrupt(&patient, &file, 0, "profile versions are not contiguous from 1"));
                }
                let xml = self.backend.read_profile(&patient, version)?.unwrap_or_default();
                let profile = parse_profile(&xml).map_err(|e| corrupt(&patient, &file, 0, e))?;
                if profile.version != version || profile.patient_id != patient {
                    return Err(corrupt(&patient, &file, 0, "patient or version attribute does not match file"));
                }
                state.profiles.push(Arc::new(profile));
            }
            for (n, line) in self.backend.read_lines(&patient, Stream::Records)?.iter().enumerate() {
                let file = Stream::Records.file_name();
                let record: SubmissionRecord =
                    serde_json::from_str(line).map_err(|e| corrupt(&patient, file, n + 1, e))?;
                if record.record_id != n as u64 + 1 || record.patient_id != patient {
                    return Err(corrupt(&patient, file, n + 1, "record id or patient out of sequence"));
                }
                if let Some(nonce) = &record.submission_nonce {
                    state.nonces.insert(nonce.clone(), record.record_id);
                }
                state.records.push(Arc::new(record));
            }
            for (n, line) in self.backend.read_lines(&patient, Stream::Alerts)?.iter().enumerate() {
                let file = Stream::Alerts.file_name();
                let alert: Alert = serde_json::from_str(line).map_err(|e| corrupt(&patient, file, n + 1, e))?;
                if alert.patient_id != patient || state.record(alert.record_id).is_none() {
                    return Err(corrupt(&patient, file, n + 1, "alert refers to an unknown record"));
                }
                max_alert = max_alert.max(alert.alert_id);
                state.alerts.push(alert);
            }
            for (n, line) in self.backend.read_lines(&patient, Stream::Acks)?.iter().enumerate() {
                let file = Stream::Acks.file_name();
                let ack: AckLine = serde_json::from_str(line).map_err(|e| corrupt(&patient, file, n + 1, e))?;
                let alert = state
                    .alerts
                    .iter_mut()
                    .find(|a| a.alert_id == ack.alert_id)
                    .ok_or_else(|| corrupt(&patient, file, n + 1, "ack for unknown alert"))?;
                alert.acknowledged = true;
            }
            let mut owners = self.alert_owner.write();
            for a in &state.alerts {
                if owners.insert(a.alert_id, patient.clone()).is_some() {
                    return Err(corrupt(&patient, Stream::Alerts.file_name(), 0, "alert id used twice"));
                }
            }
            drop(owners);
            self.patients
                .write()
                .insert(patient, Arc::new(PatientSlot { write: Mutex::new(()), state: RwLock::new(state) }));
        }
        self.next_alert_id.store(max_alert + 1, Ordering::SeqCst);
        Ok(())
    }

    fn slot(&self, patient: &str) -> Result<Arc<PatientSlot>, StoreError> {
        self.patients.read().get(patient).cloned().ok_or_else(|| StoreError::NotFound(patient.to_string()))
    }

    fn slot_or_create(&self, patient: &str) -> Result<Arc<PatientSlot>, StoreError> {
        if !is_valid_patient_id(patient) {
            return Err(StoreError::BadPatientId(patient.to_string()));
        }
        if let Some(slot) = self.patients.read().get(patient) {
            return Ok(slot.clone());
        }
        Ok(self.patients.write().entry(patient.to_string()).or_default().clone())
    }

    /// Patients with at least one stored profile.
    pub fn patients(&self) -> Vec<String> {
        self.patients
            .read()
            .iter()
            .filter(|(_, slot)| !slot.state.read().profiles.is_empty())
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Current profile version, 0 when none is stored.
    pub fn current_version(&self, patient: &str) -> u64 {
        self.slot(patient).map_or(0, |s| s.state.read().current_version())
    }

    pub fn current_profile(&self, patient: &str) -> Option<Arc<PatientProfile>> {
        self.slot(patient).ok()?.state.read().profiles.last().cloned()
    }

    pub fn profile_version(&self, patient: &str, version: u64) -> Option<Arc<PatientProfile>> {
        let slot = self.slot(patient).ok()?;
        let state = slot.state.read();
        version.checked_sub(1).and_then(|i| state.profiles.get(i as usize)).cloned()
    }

    /// Stores `profile` as the next version when `expected_version` equals
    /// the current one (0 for a new patient). The stored copy carries the
    /// patient id and the new version; earlier versions stay readable.
    pub fn store_profile(
        &self,
        patient: &str,
        profile: &PatientProfile,
        expected_version: u64,
    ) -> Result<u64, StoreError> {
        let slot = self.slot_or_create(patient)?;
        let _guard = slot.write.lock();
        let current = slot.state.read().current_version();
        if expected_version != current {
            return Err(StoreError::VersionConflict { expected: expected_version, current });
        }
        let mut stored = profile.clone();
        stored.patient_id = patient.to_string();
        stored.version = current + 1;
        let diagnostics = validate_profile(&stored);
        if has_errors(&diagnostics) {
            return Err(ValidationError { diagnostics }.into());
        }
        let xml = serialize_profile(&stored)?;
        self.backend.write_profile(patient, stored.version, &xml)?;
        slot.state.write().profiles.push(Arc::new(stored));
        Ok(current + 1)
    }

    /// Durably appends a validated record and returns its id (previous + 1).
    pub fn append_record(&self, patient: &str, draft: RecordDraft) -> Result<u64, StoreError> {
        let slot = self.slot(patient)?;
        let _guard = slot.write.lock();
        Ok(self.append_locked(patient, &slot, draft)?.record_id)
    }

    fn append_locked(
        &self,
        patient: &str,
        slot: &PatientSlot,
        draft: RecordDraft,
    ) -> Result<Arc<SubmissionRecord>, StoreError> {
        let (next_id, versions) = {
            let state = slot.state.read();
            (state.records.len() as u64 + 1, state.current_version())
        };
        if versions == 0 || draft.patient_id != patient {
            return Err(StoreError::NotFound(patient.to_string()));
        }
        if draft.profile_version == 0 || draft.profile_version > versions {
            return Err(StoreError::VersionConflict { expected: draft.profile_version, current: versions });
        }
        let record = SubmissionRecord {
            record_id: next_id,
            patient_id: patient.to_string(),
            period: draft.period,
            server_timestamp: self.clock.now(),
            client_timestamp: draft.client_timestamp,
            values: draft.values,
            profile_version: draft.profile_version,
            submission_nonce: draft.submission_nonce,
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        self.backend.append(patient, Stream::Records, &[line])?;
        let record = Arc::new(record);
        let mut state = slot.state.write();
        if let Some(nonce) = &record.submission_nonce {
            state.nonces.insert(nonce.clone(), record.record_id);
        }
        state.records.push(record.clone());
        Ok(record)
    }

    /// Turns each finding into a stored alert for `record`. No findings means
    /// no write.
    pub fn raise_alerts(&self, record: &SubmissionRecord, findings: &[BoundFinding]) -> Result<Vec<Alert>, StoreError> {
        let slot = self.slot(&record.patient_id)?;
        let _guard = slot.write.lock();
        self.raise_locked(&slot, record, findings)
    }

    fn raise_locked(
        &self,
        slot: &PatientSlot,
        record: &SubmissionRecord,
        findings: &[BoundFinding],
    ) -> Result<Vec<Alert>, StoreError> {
        if findings.is_empty() {
            return Ok(Vec::new());
        }
        if slot.state.read().record(record.record_id).map(|r| r.as_ref()) != Some(record) {
            return Err(StoreError::NotFound(format!("{}/record {}", record.patient_id, record.record_id)));
        }
        let now = self.clock.now();
        let alerts: Vec<Alert> = findings
            .iter()
            .map(|f| Alert {
                alert_id: self.next_alert_id.fetch_add(1, Ordering::SeqCst),
                patient_id: record.patient_id.clone(),
                record_id: record.record_id,
                value_id: f.value_id.clone(),
                kind: match f.kind {
                    FindingKind::Max => AlertKind::BoundMax,
                    FindingKind::Min => AlertKind::BoundMin,
                },
                severity: AlertSeverity::High,
                message: alert_message(f),
                limit: f.limit.clone(),
                observed: f.observed.clone(),
                excess: f.excess,
                server_timestamp: now,
                acknowledged: false,
            })
            .collect();
        let lines: Vec<String> = alerts.iter().map(|a| serde_json::to_string(a).expect("alert serializes")).collect();
        self.backend.append(&record.patient_id, Stream::Alerts, &lines)?;
        slot.state.write().alerts.extend(alerts.iter().cloned());
        let mut owners = self.alert_owner.write();
        for a in &alerts {
            owners.insert(a.alert_id, a.patient_id.clone());
        }
        Ok(alerts)
    }

    /// Appends the record and raises its alerts under one hold of the
    /// patient's write lock.
    ///
    /// A nonce seen within the TTL returns the earlier record and alerts
    /// without writing. If the draft was validated against a profile version
    /// that is no longer current, nothing is written and `VersionConflict`
    /// is returned.
    pub fn commit_submission(&self, draft: RecordDraft, findings: &[BoundFinding]) -> Result<Committed, StoreError> {
        let patient = draft.patient_id.clone();
        let slot = self.slot(&patient)?;
        let _guard = slot.write.lock();
        if let Some(nonce) = &draft.submission_nonce {
            if let Some(earlier) = self.replay_of(&slot, nonce) {
                return Ok(earlier);
            }
        }
        let current = slot.state.read().current_version();
        if draft.profile_version != current {
            return Err(StoreError::VersionConflict { expected: draft.profile_version, current });
        }
        let record = self.append_locked(&patient, &slot, draft)?;
        let alerts = self.raise_locked(&slot, &record, findings)?;
        Ok(Committed { record: (*record).clone(), alerts, replayed: false })
    }

    /// The earlier submission carrying `nonce`, if still within the TTL.
    pub fn find_by_nonce(&self, patient: &str, nonce: &str) -> Option<Committed> {
        let slot = self.slot(patient).ok()?;
        self.replay_of(&slot, nonce)
    }

    fn replay_of(&self, slot: &PatientSlot, nonce: &str) -> Option<Committed> {
        let state = slot.state.read();
        let record = state.record(*state.nonces.get(nonce)?)?;
        let age = self.clock.now().signed_duration_since(record.server_timestamp);
        if age.to_std().unwrap_or_default() > self.nonce_ttl {
            return None;
        }
        Some(Committed { record: (**record).clone(), alerts: state.alerts_of(record.record_id), replayed: true })
    }

    /// Records of `patient` in id order, optionally only those stored at or
    /// after `since`.
    pub fn list_records(
        &self,
        patient: &str,
        since: Option<DateTime<Utc>>,
    ) -> Result<Vec<SubmissionRecord>, StoreError> {
        let slot = self.slot(patient)?;
        let state = slot.state.read();
        Ok(state
            .records
            .iter()
            .filter(|r| since.is_none_or(|t| r.server_timestamp >= t))
            .map(|r| (**r).clone())
            .collect())
    }

    pub fn record(&self, patient: &str, record_id: u64) -> Option<SubmissionRecord> {
        let slot = self.slot(patient).ok()?;
        let state = slot.state.read();
        state.record(record_id).map(|r| (**r).clone())
    }

    /// Matching alerts ordered by server timestamp, then alert id.
    pub fn list_alerts(&self, filter: &AlertFilter) -> Vec<Alert> {
        let slots: Vec<Arc<PatientSlot>> = match &filter.patient {
            Some(p) => self.slot(p).into_iter().collect(),
            None => self.patients.read().values().cloned().collect(),
        };
        let mut out: Vec<Alert> = slots
            .iter()
            .flat_map(|s| s.state.read().alerts.iter().filter(|a| filter.matches(a)).cloned().collect::<Vec<_>>())
            .collect();
        out.sort_by(|a, b| a.server_timestamp.cmp(&b.server_timestamp).then(a.alert_id.cmp(&b.alert_id)));
        out
    }

    pub fn alert(&self, alert_id: u64) -> Option<Alert> {
        let owner = self.alert_owner.read().get(&alert_id)?.clone();
        let slot = self.slot(&owner).ok()?;
        let state = slot.state.read();
        state.alerts.iter().find(|a| a.alert_id == alert_id).cloned()
    }

    /// Marks an alert acknowledged. Acknowledging twice is a no-op.
    pub fn acknowledge(&self, alert_id: u64) -> Result<Alert, StoreError> {
        let owner = self.alert_owner.read().get(&alert_id).cloned().ok_or(StoreError::UnknownAlert(alert_id))?;
        let slot = self.slot(&owner)?;
        let _guard = slot.write.lock();
        if let Some(a) = slot.state.read().alerts.iter().find(|a| a.alert_id == alert_id) {
            if a.acknowledged {
                return Ok(a.clone());
            }
        }
        let line =
            serde_json::to_string(&AckLine { alert_id, server_timestamp: self.clock.now() }).expect("ack serializes");
        self.backend.append(&owner, Stream::Acks, &[line])?;
        let mut state = slot.state.write();
        let alert =
            state.alerts.iter_mut().find(|a| a.alert_id == alert_id).ok_or(StoreError::UnknownAlert(alert_id))?;
        alert.acknowledged = true;
        Ok(alert.clone())
    }
}

fn alert_message(f: &BoundFinding) -> String {
    let (relation, bound) = match f.kind {
        FindingKind::Max => ("above", "maximum"),
        FindingKind::Min => ("below", "minimum"),
    };
    format!("{} = {} is {relation} the {bound} {} (by {})", f.value_id, f.observed, f.limit, f.excess)
}
