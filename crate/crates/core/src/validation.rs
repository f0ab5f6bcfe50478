//! Server-side checking of submitted measurements: typed parsing, required
//! values (including trigger-gated ones), relations between values, and
//! bound findings for the doctor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoundKind, PatientProfile, RelationConstraint, TriggerRule, ValueSpec};
use crate::scalar::{Datatype, Scalar};

/// The four daily data-entry sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Morning,
    Noon,
    Evening,
    Night,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Morning => "morning",
            Period::Noon => "noon",
            Period::Evening => "evening",
            Period::Night => "night",
        }
    }
}

/// Submission wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionInput {
    pub patient_id: String,
    pub period: Period,
    pub client_timestamp: String,
    #[serde(rename = "values")]
    pub raw_values: BTreeMap<String, String>,
    /// Idempotency key; a replay within the server's window returns the
    /// original response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submission_nonce: Option<String>,
    /// Version of the profile the client's interface was compiled from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_version: Option<u64>,
}

impl SubmissionInput {
    /// Raw value for `id` if it was submitted non-blank.
    fn provided(&self, id: &str) -> Option<&str> {
        self.raw_values.get(id).map(String::as_str).filter(|raw| !raw.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedValue {
    pub value_id: String,
    pub value: Scalar,
}

impl TypedValue {
    pub fn datatype(&self) -> Datatype {
        self.value.datatype()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("value `{value_id}`: `{raw}` is not a valid {datatype}")]
pub struct TypeError {
    pub value_id: String,
    pub datatype: Datatype,
    pub raw: String,
}

/// Parses one raw entry under the strict grammar of its datatype.
pub fn parse_typed(value_id: &str, raw: &str, datatype: Datatype) -> Result<TypedValue, TypeError> {
    Scalar::parse(raw, datatype)
        .map(|value| TypedValue { value_id: value_id.to_string(), value })
        .ok_or_else(|| TypeError { value_id: value_id.to_string(), datatype, raw: raw.to_string() })
}

/// An accepted measurement outside its inclusive bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFinding {
    pub value_id: String,
    pub kind: FindingKind,
    pub limit: Scalar,
    pub observed: Scalar,
    /// Distance past the limit; minutes for time values.
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingKind {
    Min,
    Max,
}

impl From<BoundKind> for FindingKind {
    fn from(kind: BoundKind) -> Self {
        match kind {
            BoundKind::Min => FindingKind::Min,
            BoundKind::Max => FindingKind::Max,
        }
    }
}

/// Inclusive bound check: a finding iff observed < min or observed > max.
pub fn check_bounds(value: &TypedValue, spec: &ValueSpec) -> Vec<BoundFinding> {
    if value.datatype() != spec.datatype || !spec.datatype.is_ordered() {
        return Vec::new();
    }
    let mut findings = Vec::new();
    let checks = [
        (BoundKind::Min, &spec.bounds.min, std::cmp::Ordering::Less),
        (BoundKind::Max, &spec.bounds.max, std::cmp::Ordering::Greater),
    ];
    for (kind, limit, violating) in checks {
        let Some(limit) = limit else { continue };
        if value.value.order(limit) == Some(violating) {
            findings.push(BoundFinding {
                value_id: value.value_id.clone(),
                kind: kind.into(),
                limit: limit.clone(),
                observed: value.value.clone(),
                excess: value.value.distance(limit).unwrap_or(0.0),
            });
        }
    }
    findings
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationViolation {
    pub index: usize,
    pub relation: RelationConstraint,
    pub left: Scalar,
    pub right: Scalar,
}

/// Relations whose comparison fails. Relations with an operand missing from
/// `values` are skipped.
pub fn check_relations(relations: &[RelationConstraint], values: &BTreeMap<String, Scalar>) -> Vec<RelationViolation> {
    relations
        .iter()
        .enumerate()
        .filter_map(|(index, rel)| {
            let left = values.get(&rel.left)?;
            let right = values.get(&rel.right)?;
            match rel.op.holds(left, right) {
                Some(true) => None,
                _ => Some(RelationViolation { index, relation: rel.clone(), left: left.clone(), right: right.clone() }),
            }
        })
        .collect()
}

/// Union of the `require` sets of every trigger whose condition holds.
/// Single pass: a trigger's action never feeds another trigger.
pub fn evaluate_triggers(triggers: &[TriggerRule], values: &BTreeMap<String, Scalar>) -> BTreeSet<String> {
    let mut required = BTreeSet::new();
    for trigger in triggers {
        let cond = &trigger.condition;
        let Some(observed) = values.get(&cond.value_id) else { continue };
        let Some(constant) = Scalar::parse(&cond.literal, observed.datatype()) else { continue };
        if cond.op.holds(observed, &constant) == Some(true) {
            required.extend(trigger.require.iter().cloned());
        }
    }
    required
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectionCode {
    UnknownValue,
    TypeError,
    MissingRequired,
    RelationViolation,
}

impl RejectionCode {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionCode::UnknownValue => "UNKNOWN_VALUE",
            RejectionCode::TypeError => "TYPE_ERROR",
            RejectionCode::MissingRequired => "MISSING_REQUIRED",
            RejectionCode::RelationViolation => "RELATION_VIOLATION",
        }
    }
}

impl fmt::Display for RejectionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub code: RejectionCode,
    /// Offending value ids: one for value-level problems, both operands for
    /// a relation violation.
    pub value_ids: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Accepted,
    Rejected,
}

/// Validated data ready to be stored; the store assigns id and timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDraft {
    pub patient_id: String,
    pub period: Period,
    pub client_timestamp: String,
    pub values: BTreeMap<String, Scalar>,
    pub profile_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submission_nonce: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordDraft>,
    pub rejections: Vec<Rejection>,
    pub findings: Vec<BoundFinding>,
}

impl ValidationOutcome {
    pub fn is_accepted(&self) -> bool {
        self.status == Status::Accepted
    }
}

/// Runs the full pipeline for one submission against `profile`:
///
/// 1. submitted ids the profile does not define are rejected;
/// 2. every non-blank value is parsed under its datatype;
/// 3. all values are required except trigger-gated ones, which become
///    required when a trigger over the parsed values fires;
/// 4. relations whose operands both parsed must hold;
/// 5. bound checks produce findings, which never reject.
///
/// Rejections from steps 1-4 are all collected. Blank entries count as
/// not submitted.
pub fn validate_submission(profile: &PatientProfile, input: &SubmissionInput) -> ValidationOutcome {
    let mut rejections = Vec::new();
    let index = profile.value_index();

    for id in input.raw_values.keys() {
        if !index.contains_key(id.as_str()) {
            rejections.push(Rejection {
                code: RejectionCode::UnknownValue,
                value_ids: vec![id.clone()],
                message: format!("`{id}` is not a value of this profile"),
            });
        }
    }

    let mut typed: BTreeMap<String, Scalar> = BTreeMap::new();
    for (_, spec) in profile.values() {
        let Some(raw) = input.provided(&spec.id) else { continue };
        match parse_typed(&spec.id, raw, spec.datatype) {
            Ok(v) => {
                typed.insert(v.value_id, v.value);
            }
            Err(e) => rejections.push(Rejection {
                code: RejectionCode::TypeError,
                value_ids: vec![spec.id.clone()],
                message: e.to_string(),
            }),
        }
    }

    let gated = profile.trigger_gated();
    let fired = evaluate_triggers(&profile.triggers, &typed);
    for (_, spec) in profile.values() {
        let required = !gated.contains(spec.id.as_str()) || fired.contains(&spec.id);
        if required && input.provided(&spec.id).is_none() {
            rejections.push(Rejection {
                code: RejectionCode::MissingRequired,
                value_ids: vec![spec.id.clone()],
                message: format!("`{}` ({}) is required", spec.id, spec.label()),
            });
        }
    }

    for v in check_relations(&profile.relations, &typed) {
        let rel = &v.relation;
        rejections.push(Rejection {
            code: RejectionCode::RelationViolation,
            value_ids: vec![rel.left.clone(), rel.right.clone()],
            message: format!("`{}` = {} must be {} `{}` = {}", rel.left, v.left, op_phrase(rel.op), rel.right, v.right),
        });
    }

    if !rejections.is_empty() {
        return ValidationOutcome { status: Status::Rejected, record: None, rejections, findings: Vec::new() };
    }

    let findings = profile
        .values()
        .filter_map(|(_, spec)| {
            let value = typed.get(&spec.id)?;
            Some(check_bounds(&TypedValue { value_id: spec.id.clone(), value: value.clone() }, spec))
        })
        .flatten()
        .collect();
    let record = RecordDraft {
        patient_id: input.patient_id.clone(),
        period: input.period,
        client_timestamp: input.client_timestamp.clone(),
        values: typed,
        profile_version: profile.version,
        submission_nonce: input.submission_nonce.clone(),
    };
    ValidationOutcome { status: Status::Accepted, record: Some(record), rejections, findings }
}

fn op_phrase(op: crate::scalar::CompareOp) -> &'static str {
    use crate::scalar::CompareOp::*;
    match op {
        Lt => "less than",
        Le => "at most",
        Gt => "greater than",
        Ge => "at least",
        Eq => "equal to",
        Ne => "different from",
    }
}
