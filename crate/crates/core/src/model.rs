//! Patient profile data model: medical components, their typed values,
//! retrieval bindings, cross-value relations and conditional triggers.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::{CompareOp, Datatype, Scalar};

/// Namespace whose elements are preserved verbatim inside a profile document.
pub const EXTENSION_NAMESPACE: &str = "urn:medforge:extension";

/// The complete monitoring profile of one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientProfile {
    pub patient_id: String,
    pub medcomps: Vec<MedComp>,
    pub relations: Vec<RelationConstraint>,
    pub triggers: Vec<TriggerRule>,
    /// Assigned by the profile store; 0 for a profile that was never stored.
    pub version: u64,
    pub extensions: Vec<ExtElement>,
}

impl PatientProfile {
    pub fn new(patient_id: impl Into<String>) -> Self {
        PatientProfile {
            patient_id: patient_id.into(),
            medcomps: Vec::new(),
            relations: Vec::new(),
            triggers: Vec::new(),
            version: 0,
            extensions: Vec::new(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = (&MedComp, &ValueSpec)> {
        self.medcomps.iter().flat_map(|mc| mc.values.iter().map(move |v| (mc, v)))
    }

    /// First value with the given id. Ids are unique in a valid profile.
    pub fn value(&self, id: &str) -> Option<&ValueSpec> {
        self.values().map(|(_, v)| v).find(|v| v.id == id)
    }

    pub fn value_index(&self) -> BTreeMap<&str, &ValueSpec> {
        let mut index = BTreeMap::new();
        for (_, v) in self.values() {
            index.entry(v.id.as_str()).or_insert(v);
        }
        index
    }

    /// Values that only become required once a trigger names them.
    pub fn trigger_gated(&self) -> BTreeSet<&str> {
        self.triggers.iter().flat_map(|t| t.require.iter().map(String::as_str)).collect()
    }
}

/// One monitored entity (e.g. Blood Pressure) and its measurable values.
#[derive(Debug, Clone, PartialEq)]
pub struct MedComp {
    pub id: String,
    pub name: String,
    /// Physical state during measurement, e.g. "sitting".
    pub state: Option<String>,
    pub key: Option<String>,
    pub help_text: Option<String>,
    pub values: Vec<ValueSpec>,
    pub retrieves: Vec<RetrieveBinding>,
    pub extensions: Vec<ExtElement>,
}

impl MedComp {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        MedComp {
            id: id.into(),
            name: name.into(),
            state: None,
            key: None,
            help_text: None,
            values: Vec::new(),
            retrieves: Vec::new(),
            extensions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSpec {
    pub id: String,
    pub datatype: Datatype,
    pub descrips: Vec<Descrip>,
    pub bounds: Bounds,
    pub extensions: Vec<ExtElement>,
}

impl ValueSpec {
    pub fn new(id: impl Into<String>, datatype: Datatype) -> Self {
        ValueSpec { id: id.into(), datatype, descrips: Vec::new(), bounds: Bounds::default(), extensions: Vec::new() }
    }

    /// Human label: the first description text, falling back to the id.
    pub fn label(&self) -> &str {
        self.descrips.iter().map(|d| d.text.as_str()).find(|t| !t.is_empty()).unwrap_or(&self.id)
    }
}

/// A `<descrip type=".." class="..">text</descrip>` entry. Tags are opaque.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descrip {
    pub type_tag: String,
    pub class_tag: String,
    pub text: String,
}

/// Inclusive limits of the acceptable range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bounds {
    pub min: Option<Scalar>,
    pub max: Option<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Min,
    Max,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Min => "min",
            BoundKind::Max => "max",
        }
    }
}

/// Peers entry: how the value is retrieved from the interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrieveBinding {
    pub idref: String,
    pub type_tag: String,
    pub method_name: String,
    pub params: Vec<MethodParam>,
    pub return_datatype: Datatype,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodParam {
    pub datatype: Datatype,
    pub name: String,
}

/// `left op right` must hold for every accepted submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationConstraint {
    pub op: CompareOp,
    pub left: String,
    pub right: String,
}

/// When the condition holds, every value in `require` becomes required and visible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerRule {
    pub condition: TriggerCondition,
    pub require: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerCondition {
    pub value_id: String,
    pub op: CompareOp,
    /// Constant literal, parsed under the condition value's datatype.
    pub literal: String,
}

/// An element from [`EXTENSION_NAMESPACE`], carried through unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtElement {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<ExtNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtNode {
    Element(ExtElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("medcomp name `{0}` yields no usable entity key")]
    InvalidName(String),
}

/// Short identifier used to prefix every UI part generated for `medcomp`.
///
/// Explicit keys win; otherwise multi-word names give their uppercase
/// initials ("Blood Pressure" -> "BP") and single words keep their
/// alphanumerics. Collisions with `taken` get the smallest free numeric
/// suffix starting at 2.
pub fn derive_entity_key(medcomp: &MedComp, taken: &BTreeSet<String>) -> Result<String, KeyError> {
    let base = match medcomp.key.as_deref() {
        Some(key) if is_valid_key(key) => key.to_string(),
        Some(_) => return Err(KeyError::InvalidName(medcomp.name.clone())),
        None => key_from_name(&medcomp.name).ok_or_else(|| KeyError::InvalidName(medcomp.name.clone()))?,
    };
    if !taken.contains(&base) {
        return Ok(base);
    }
    let key = (2u64..)
        .map(|n| format!("{base}{n}"))
        .find(|candidate| !taken.contains(candidate))
        .expect("unbounded suffix search");
    Ok(key)
}

/// Name-derived key before collision handling, if the name yields one.
pub fn key_from_name(name: &str) -> Option<String> {
    let words: Vec<&str> = name.split_whitespace().collect();
    let raw: String = if words.len() >= 2 {
        words
            .iter()
            .filter_map(|w| w.chars().find(|c| c.is_ascii_alphanumeric()))
            .map(|c| c.to_ascii_uppercase())
            .collect()
    } else {
        name.chars().filter(char::is_ascii_alphanumeric).collect()
    };
    let key = raw.trim_start_matches(|c: char| c.is_ascii_digit());
    is_valid_key(key).then(|| key.to_string())
}

/// `[A-Za-z][A-Za-z0-9]*`
pub fn is_valid_key(key: &str) -> bool {
    let mut chars = key.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Slot values used to instantiate the per-entity templates.
pub fn substitution_context(medcomp: &MedComp, key: &str) -> BTreeMap<String, String> {
    let mut ctx = BTreeMap::new();
    ctx.insert("key".to_string(), key.to_string());
    ctx.insert("name".to_string(), medcomp.name.clone());
    ctx.insert("state".to_string(), medcomp.state.clone().unwrap_or_default());
    ctx.insert("medcomp_id".to_string(), medcomp.id.clone());
    let help = medcomp.help_text.clone().unwrap_or_else(|| default_help_text(medcomp));
    ctx.insert("help_text".to_string(), help);
    ctx
}

fn default_help_text(medcomp: &MedComp) -> String {
    let mut text = match medcomp.state.as_deref().filter(|s| !s.is_empty()) {
        Some(state) => format!("Measure your {} while {}.", medcomp.name, state),
        None => format!("Measure your {}.", medcomp.name),
    };
    let labels: Vec<&str> = medcomp.values.iter().map(ValueSpec::label).collect();
    if !labels.is_empty() {
        text.push_str(&format!(" Enter: {}.", labels.join(", ")));
    }
    for value in &medcomp.values {
        let range = match (&value.bounds.min, &value.bounds.max) {
            (Some(min), Some(max)) => format!("between {min} and {max}"),
            (Some(min), None) => format!("at least {min}"),
            (None, Some(max)) => format!("at most {max}"),
            (None, None) => continue,
        };
        text.push_str(&format!(" Normal {} is {}.", value.label(), range));
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(name: &str) -> MedComp {
        MedComp::new("m", name)
    }

    fn taken(keys: &[&str]) -> BTreeSet<String> {
        keys.iter().map(|k| k.to_string()).collect()
    }

    #[test]
    fn initials_for_multi_word_names() {
        assert_eq!(derive_entity_key(&named("Blood Pressure"), &taken(&[])).unwrap(), "BP");
        assert_eq!(derive_entity_key(&named("body  temperature"), &taken(&[])).unwrap(), "BT");
    }

    #[test]
    fn single_word_keeps_alphanumerics() {
        assert_eq!(derive_entity_key(&named("Weight"), &taken(&[])).unwrap(), "Weight");
        assert_eq!(derive_entity_key(&named("Bag-size"), &taken(&[])).unwrap(), "Bagsize");
    }

    #[test]
    fn collisions_take_smallest_suffix() {
        assert_eq!(derive_entity_key(&named("Blood Pressure"), &taken(&["BP"])).unwrap(), "BP2");
        assert_eq!(derive_entity_key(&named("Blood Pressure"), &taken(&["BP", "BP2"])).unwrap(), "BP3");
    }

    #[test]
    fn explicit_key_wins() {
        let mut mc = named("Blood Pressure");
        mc.key = Some("Bp".into());
        assert_eq!(derive_entity_key(&mc, &taken(&[])).unwrap(), "Bp");
    }

    #[test]
    fn empty_names_are_rejected() {
        for name in ["", "   ", "***", "12"] {
            assert!(derive_entity_key(&named(name), &taken(&[])).is_err(), "{name:?}");
        }
        let mut mc = named("ok");
        mc.key = Some("9lives".into());
        assert!(derive_entity_key(&mc, &taken(&[])).is_err());
    }

    #[test]
    fn context_passes_help_text_through() {
        let mut mc = named("Blood Pressure");
        mc.id = "00215062000112".into();
        mc.state = Some("sitting".into());
        mc.help_text = Some("Measure seated.".into());
        let ctx = substitution_context(&mc, "BP");
        assert_eq!(ctx["key"], "BP");
        assert_eq!(ctx["name"], "Blood Pressure");
        assert_eq!(ctx["state"], "sitting");
        assert_eq!(ctx["medcomp_id"], "00215062000112");
        assert_eq!(ctx["help_text"], "Measure seated.");
    }

    #[test]
    fn generated_help_mentions_name_state_and_bounds() {
        let mut mc = named("Blood Pressure");
        mc.state = Some("sitting".into());
        let mut sys = ValueSpec::new("sys", Datatype::Integer);
        sys.bounds.max = Some(Scalar::Integer(23));
        mc.values.push(sys);
        let help = &substitution_context(&mc, "BP")["help_text"];
        assert!(help.contains("Blood Pressure"));
        assert!(help.contains("sitting"));
        assert!(help.contains("23"));
    }
}
