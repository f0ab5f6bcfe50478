//! HTTP routes. Every handler authenticates, checks [`allowed`], then talks
//! to the store; no other state survives between requests except sessions
//! and the compiled-UI cache.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use medforge_core::profile_io::{has_errors, read_profile, ProfileDiagnostic};
use medforge_core::store::{AlertFilter, Committed, StoreError};
use medforge_core::{serialize_profile, validate_submission, PatientProfile, Store, SubmissionInput, TemplateSet};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::auth::{CredentialSet, Role, Session, Sessions};
use crate::webhook::Webhook;
use crate::{render_ui, UiFormat};

pub const PROFILE_VERSION_HEADER: &str = "x-profile-version";

pub struct AppState {
    pub store: Arc<Store>,
    pub templates: Arc<TemplateSet>,
    pub credentials: CredentialSet,
    pub sessions: Sessions,
    pub webhook: Option<Webhook>,
    ui_cache: Mutex<HashMap<(String, u64, UiFormat), Arc<str>>>,
}

impl AppState {
    pub fn new(
        store: Arc<Store>,
        templates: Arc<TemplateSet>,
        credentials: CredentialSet,
        sessions: Sessions,
        webhook: Option<Webhook>,
    ) -> AppState {
        AppState { store, templates, credentials, sessions, webhook, ui_cache: Mutex::new(HashMap::new()) }
    }
}

/// Every operation that requires a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    GetProfile,
    PutProfile,
    GetUi,
    Submit,
    ListRecords,
    ListAlerts,
    AckAlert,
}

impl Endpoint {
    pub const ALL: [Endpoint; 7] = [
        Endpoint::GetProfile,
        Endpoint::PutProfile,
        Endpoint::GetUi,
        Endpoint::Submit,
        Endpoint::ListRecords,
        Endpoint::ListAlerts,
        Endpoint::AckAlert,
    ];
}

/// The authorization matrix. `own` says whether the patient in the URL is
/// the one the session acts for; it is false for endpoints with no patient.
pub fn allowed(role: Role, endpoint: Endpoint, own: bool) -> bool {
    use Endpoint::*;
    match role {
        Role::Doctor => endpoint != Submit,
        Role::Patient => own && matches!(endpoint, GetProfile | GetUi | Submit | ListRecords),
        Role::Device => own && endpoint == Submit,
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Vec<(&'static str, Value)>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into(), extra: Vec::new() }
    }

    fn with(mut self, key: &'static str, value: Value) -> ApiError {
        self.extra.push((key, value));
        self
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn unauthorized() -> ApiError {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing, unknown or expired credentials")
    }

    fn forbidden() -> ApiError {
        ApiError::new(StatusCode::FORBIDDEN, "forbidden", "this role may not perform that operation")
    }

    fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn internal(message: impl Into<String>) -> ApiError {
        let message = message.into();
        tracing::error!("{message}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn invalid_profile(diagnostics: &[ProfileDiagnostic]) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_profile", "the profile has errors")
            .with("diagnostics", json!(diagnostics))
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> ApiError {
        match e {
            StoreError::NotFound(_) | StoreError::UnknownAlert(_) => ApiError::not_found(e.to_string()),
            StoreError::BadPatientId(_) => ApiError::bad_request(e.to_string()),
            StoreError::VersionConflict { current, .. } => {
                ApiError::new(StatusCode::CONFLICT, "version_conflict", e.to_string())
                    .with("current_version", json!(current))
            }
            StoreError::Invalid(v) => ApiError::invalid_profile(&v.diagnostics),
            StoreError::Storage(_) | StoreError::Corrupt { .. } => ApiError::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        for (k, v) in self.extra {
            body[k] = v;
        }
        let mut resp = (self.status, Json(body)).into_response();
        if self.status == StatusCode::UNAUTHORIZED {
            resp.headers_mut().insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        resp
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/patients/{id}/profile", get(get_profile).put(put_profile))
        .route("/api/patients/{id}/ui", get(get_ui))
        .route("/api/patients/{id}/submissions", post(submit))
        .route("/api/patients/{id}/records", get(list_records))
        .route("/api/alerts", get(list_alerts))
        .route("/api/alerts/{id}/ack", post(ack_alert))
        .with_state(state)
}

fn session(state: &AppState, headers: &HeaderMap) -> ApiResult<Session> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .ok_or_else(ApiError::unauthorized)?;
    state.sessions.resolve(token).ok_or_else(ApiError::unauthorized)
}

fn authorize(state: &AppState, headers: &HeaderMap, endpoint: Endpoint, patient: Option<&str>) -> ApiResult<Session> {
    let s = session(state, headers)?;
    let own = patient.is_some() && s.patient() == patient;
    if allowed(s.role, endpoint, own) {
        Ok(s)
    } else {
        Err(ApiError::forbidden())
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))
}

fn parse_since(query: &HashMap<String, String>) -> ApiResult<Option<DateTime<Utc>>> {
    query
        .get("since")
        .map(|s| {
            DateTime::parse_from_rfc3339(s)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|_| ApiError::bad_request(format!("`since` is not an RFC 3339 timestamp: {s}")))
        })
        .transpose()
}

fn version_header(version: u64) -> (HeaderName, HeaderValue) {
    (HeaderName::from_static(PROFILE_VERSION_HEADER), HeaderValue::from(version))
}

fn current_profile(state: &AppState, patient: &str) -> ApiResult<Arc<PatientProfile>> {
    state
        .store
        .current_profile(patient)
        .ok_or_else(|| ApiError::not_found(format!("no profile for patient `{patient}`")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

#[derive(Deserialize)]
struct LoginRequest {
    #[serde(alias = "patient_id", alias = "doctor_id", alias = "device_id")]
    principal: String,
    password: String,
}

async fn login(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: LoginRequest = parse_json(&body)?;
    let cred = state.credentials.authenticate(&req.principal, &req.password).ok_or_else(ApiError::unauthorized)?;
    let s = state.sessions.issue(cred);
    Ok(Json(json!({
        "token": s.token,
        "principal": s.principal,
        "role": s.role,
        "expires_at": s.expires_at,
    })))
}

async fn get_profile(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    authorize(&state, &headers, Endpoint::GetProfile, Some(&id))?;
    let profile = current_profile(&state, &id)?;
    let xml = serialize_profile(&profile).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("application/xml")), version_header(profile.version)], xml)
        .into_response())
}

async fn put_profile(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    authorize(&state, &headers, Endpoint::PutProfile, Some(&id))?;
    let expected = query
        .get("expected_version")
        .ok_or_else(|| ApiError::bad_request("`expected_version` query parameter is required"))?
        .parse::<u64>()
        .map_err(|_| ApiError::bad_request("`expected_version` must be a non-negative integer"))?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("profile is not UTF-8"))?;
    let report = read_profile(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if has_errors(&report.diagnostics) {
        return Err(ApiError::invalid_profile(&report.diagnostics));
    }
    if report.profile.patient_id != id {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "patient_mismatch",
            format!("profile is for `{}` but was sent to `{id}`", report.profile.patient_id),
        ));
    }
    let store = state.store.clone();
    let patient = id.clone();
    let version = blocking(move || store.store_profile(&patient, &report.profile, expected)).await??;
    Ok(Json(json!({ "patient_id": id, "version": version })))
}

#[derive(Deserialize)]
struct UiQuery {
    format: Option<String>,
}

async fn get_ui(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<UiQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    authorize(&state, &headers, Endpoint::GetUi, Some(&id))?;
    let format = match query.format.as_deref() {
        None => UiFormat::Uiml,
        Some(f) => f.parse().map_err(ApiError::bad_request)?,
    };
    let profile = current_profile(&state, &id)?;
    let key = (id, profile.version, format);
    let cached = state.ui_cache.lock().get(&key).cloned();
    let body = match cached {
        Some(body) => body,
        None => {
            let body: Arc<str> =
                render_ui(&profile, &state.templates, format).map_err(|e| ApiError::internal(e.to_string()))?.into();
            let mut cache = state.ui_cache.lock();
            // older versions of this patient's UI are never served again
            cache.retain(|(p, v, _), _| *p != key.0 || *v >= key.1);
            cache.insert(key, body.clone());
            body
        }
    };
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static(format.content_type())), version_header(profile.version)],
        body.to_string(),
    )
        .into_response())
}

fn accepted_body(c: &Committed) -> Value {
    json!({
        "status": "accepted",
        "record_id": c.record.record_id,
        "alerts": c.alerts,
    })
}

async fn submit(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    authorize(&state, &headers, Endpoint::Submit, Some(&id))?;
    let input: SubmissionInput = parse_json(&body)?;
    if input.patient_id != id {
        return Err(ApiError::bad_request(format!("submission is for `{}` but was sent to `{id}`", input.patient_id)));
    }
    if let Some(original) = input.submission_nonce.as_deref().and_then(|n| state.store.find_by_nonce(&id, n)) {
        return Ok(Json(accepted_body(&original)));
    }
    let profile = current_profile(&state, &id)?;
    if let Some(v) = input.profile_version.filter(|v| *v != profile.version) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "version_skew",
            format!("the form was built from profile version {v}; fetch the UI again"),
        )
        .with("current_version", json!(profile.version)));
    }
    let outcome = validate_submission(&profile, &input);
    let Some(draft) = outcome.record else {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "rejected", "the submission was rejected")
            .with("status", json!("rejected"))
            .with("rejections", json!(outcome.rejections)));
    };
    let store = state.store.clone();
    let findings = outcome.findings;
    let committed = blocking(move || store.commit_submission(draft, &findings)).await?.map_err(|e| match e {
        StoreError::VersionConflict { current, .. } => ApiError::new(
            StatusCode::CONFLICT,
            "version_skew",
            "the profile changed while the submission was processed; fetch the UI again",
        )
        .with("current_version", json!(current)),
        other => other.into(),
    })?;
    if let (Some(hook), false) = (&state.webhook, committed.replayed) {
        for alert in &committed.alerts {
            hook.enqueue(alert.clone());
        }
    }
    Ok(Json(accepted_body(&committed)))
}

async fn list_records(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    authorize(&state, &headers, Endpoint::ListRecords, Some(&id))?;
    let since = parse_since(&query)?;
    let records = state.store.list_records(&id, since)?;
    Ok(Json(json!(records)))
}

async fn list_alerts(
    State(state): State<Arc<AppState>>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    authorize(&state, &headers, Endpoint::ListAlerts, None)?;
    let unacknowledged_only = match query.get("unacknowledged_only").map(String::as_str) {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!("`unacknowledged_only` must be true or false, not {other}")))
        }
    };
    let filter =
        AlertFilter { patient: query.get("patient").cloned(), since: parse_since(&query)?, unacknowledged_only };
    Ok(Json(json!(state.store.list_alerts(&filter))))
}

async fn ack_alert(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    authorize(&state, &headers, Endpoint::AckAlert, None)?;
    let alert_id: u64 = id.parse().map_err(|_| ApiError::not_found(format!("no alert `{id}`")))?;
    let store = state.store.clone();
    let alert = blocking(move || store.acknowledge(alert_id)).await??;
    Ok(Json(json!(alert)))
}
