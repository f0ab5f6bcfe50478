use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;
use thiserror::Error;

use super::{Part, UiDocument, WidgetClass};
use crate::model::PatientProfile;
use crate::scalar::{CompareOp, Datatype, Scalar};

/// Renderer-neutral role of a widget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Window,
    Panel,
    Label,
    TextInput,
    TextArea,
    Button,
}

impl Role {
    pub fn for_class(class: &WidgetClass) -> Option<Role> {
        Some(match class {
            WidgetClass::JFrame => Role::Window,
            WidgetClass::JPanel => Role::Panel,
            WidgetClass::JLabel => Role::Label,
            WidgetClass::JTextField => Role::TextInput,
            WidgetClass::JTextArea => Role::TextArea,
            WidgetClass::JButton => Role::Button,
            WidgetClass::Other(_) => return None,
        })
    }
}

/// Wire form consumed by the patient console; see `docs/widget-tree.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetTree {
    pub patient_id: String,
    pub profile_version: u64,
    pub roots: Vec<WidgetNode>,
    pub relations: Vec<RelationDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetNode {
    pub role: Role,
    pub name: String,
    /// Initial visibility.
    pub visible: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub props: BTreeMap<String, String>,
    pub children: Vec<WidgetNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDescriptor>,
    /// Behavior rules whose event source is this node.
    pub rules: Vec<RuleDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub value_id: String,
    pub datatype: Datatype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<JsonValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<JsonValue>,
    /// False for trigger-gated values until one of `show_when` holds.
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub show_when: Vec<ConditionDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDescriptor {
    pub value_id: String,
    pub op: CompareOp,
    pub value: JsonValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDescriptor {
    pub event: String,
    pub source: String,
    pub actions: Vec<ActionDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub property: String,
    pub target: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDescriptor {
    pub op: CompareOp,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoweringError {
    #[error("part `{part}` has widget class `{class}` outside the supported vocabulary")]
    UnknownWidgetClass { part: String, class: String },
    #[error("part `{part}` is bound to value `{value_id}` which the profile does not define")]
    UnknownValue { part: String, value_id: String },
}

struct Lowering<'a> {
    doc: &'a UiDocument,
    profile: &'a PatientProfile,
    gated: BTreeSet<&'a str>,
    /// Label part name -> input part name, from the `for` style property.
    label_for: BTreeMap<&'a str, &'a str>,
    /// Input part name -> bound value id.
    input_values: BTreeMap<&'a str, &'a str>,
}

/// Maps every part onto its role and attaches what a renderer needs:
/// initial visibility, style properties, input validation descriptors,
/// the behavior rules each node fires, and trigger-driven visibility.
pub fn lower_to_widget_tree(doc: &UiDocument, profile: &PatientProfile) -> Result<WidgetTree, LoweringError> {
    let all = doc.all_parts();
    let label_for =
        doc.styles.iter().filter(|s| s.name == "for").map(|s| (s.part_name.as_str(), s.value.as_str())).collect();
    let input_values = all.iter().filter_map(|p| p.bound_value_id.as_deref().map(|id| (p.name.as_str(), id))).collect();
    let lowering = Lowering { doc, profile, gated: profile.trigger_gated(), label_for, input_values };
    let roots = doc.parts.iter().map(|p| lowering.node(p)).collect::<Result<_, _>>()?;
    let relations = profile
        .relations
        .iter()
        .map(|r| RelationDescriptor { op: r.op, left: r.left.clone(), right: r.right.clone() })
        .collect();
    Ok(WidgetTree { patient_id: profile.patient_id.clone(), profile_version: profile.version, roots, relations })
}

impl<'a> Lowering<'a> {
    fn node(&self, part: &Part) -> Result<WidgetNode, LoweringError> {
        let role = Role::for_class(&part.widget_class).ok_or_else(|| LoweringError::UnknownWidgetClass {
            part: part.name.clone(),
            class: part.widget_class.to_string(),
        })?;
        let mut props: BTreeMap<String, String> = BTreeMap::new();
        let mut visible = true;
        for s in self.doc.styles.iter().filter(|s| s.part_name == part.name) {
            if s.name == "visible" {
                visible = s.value != "false";
            } else {
                props.insert(s.name.clone(), s.value.clone());
            }
        }

        let input = match &part.bound_value_id {
            Some(id) => Some(self.input(part, id)?),
            None => None,
        };
        let gated_value = match &input {
            Some(i) => Some(i.value_id.as_str()),
            None => self.label_for.get(part.name.as_str()).and_then(|target| self.input_values.get(target)).copied(),
        };
        if gated_value.is_some_and(|id| self.gated.contains(id)) {
            visible = false;
        }

        let rules = self
            .doc
            .behavior
            .iter()
            .filter(|r| r.event.part_name == part.name)
            .map(|r| RuleDescriptor {
                event: r.event.class.as_str().to_string(),
                source: r.event.part_name.clone(),
                actions: r
                    .actions
                    .iter()
                    .map(|a| ActionDescriptor {
                        property: a.property.clone(),
                        target: a.part_name.clone(),
                        value: a.value.clone(),
                    })
                    .collect(),
            })
            .collect();
        let children = part.children.iter().map(|c| self.node(c)).collect::<Result<_, _>>()?;
        Ok(WidgetNode { role, name: part.name.clone(), visible, props, children, input, rules })
    }

    fn input(&self, part: &Part, value_id: &str) -> Result<InputDescriptor, LoweringError> {
        let spec = self
            .profile
            .value(value_id)
            .ok_or_else(|| LoweringError::UnknownValue { part: part.name.clone(), value_id: value_id.to_string() })?;
        let show_when: Vec<ConditionDescriptor> = self
            .profile
            .triggers
            .iter()
            .filter(|t| t.require.iter().any(|r| r == value_id))
            .filter_map(|t| {
                let cond_type = self.profile.value(&t.condition.value_id)?.datatype;
                let literal = Scalar::parse(&t.condition.literal, cond_type)?;
                Some(ConditionDescriptor {
                    value_id: t.condition.value_id.clone(),
                    op: t.condition.op,
                    value: literal.to_json(),
                })
            })
            .collect();
        Ok(InputDescriptor {
            value_id: value_id.to_string(),
            datatype: spec.datatype,
            min: spec.bounds.min.as_ref().map(Scalar::to_json),
            max: spec.bounds.max.as_ref().map(Scalar::to_json),
            required: !self.gated.contains(value_id),
            options: (spec.datatype == Datatype::Boolean).then(|| vec!["true".into(), "false".into()]),
            show_when,
        })
    }
}
