//! Compiled interface documents in a UIML subset, and their lowering to a
//! renderer-neutral widget tree.

mod compile;
mod uiml;
mod widget;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::RetrieveBinding;

pub use compile::{compile_profile, CompileError};
pub use uiml::{parse_ui, serialize_ui, UiParseError};
pub use widget::{
    lower_to_widget_tree, ActionDescriptor, ConditionDescriptor, InputDescriptor, LoweringError, RelationDescriptor,
    Role, RuleDescriptor, WidgetNode, WidgetTree,
};

/// Widget vocabulary of the interface. Anything else can only come from a
/// hand-written document and is rejected by serialization and lowering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WidgetClass {
    JFrame,
    JPanel,
    JLabel,
    JTextField,
    JTextArea,
    JButton,
    Other(String),
}

impl WidgetClass {
    pub fn parse(token: &str) -> WidgetClass {
        match token {
            "JFrame" => WidgetClass::JFrame,
            "JPanel" => WidgetClass::JPanel,
            "JLabel" => WidgetClass::JLabel,
            "JTextField" => WidgetClass::JTextField,
            "JTextArea" => WidgetClass::JTextArea,
            "JButton" => WidgetClass::JButton,
            other => WidgetClass::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            WidgetClass::JFrame => "JFrame",
            WidgetClass::JPanel => "JPanel",
            WidgetClass::JLabel => "JLabel",
            WidgetClass::JTextField => "JTextField",
            WidgetClass::JTextArea => "JTextArea",
            WidgetClass::JButton => "JButton",
            WidgetClass::Other(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, WidgetClass::Other(_))
    }
}

impl fmt::Display for WidgetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub widget_class: WidgetClass,
    pub name: String,
    pub children: Vec<Part>,
    /// Set on input parts only.
    pub bound_value_id: Option<String>,
}

impl Part {
    pub fn new(widget_class: WidgetClass, name: impl Into<String>) -> Self {
        Part { widget_class, name: name.into(), children: Vec::new(), bound_value_id: None }
    }

    /// Pre-order traversal of this part and its descendants.
    pub fn walk(&self) -> Vec<&Part> {
        let mut out = vec![self];
        for child in &self.children {
            out.extend(child.walk());
        }
        out
    }

    pub(crate) fn find_mut(&mut self, name: &str) -> Option<&mut Part> {
        if self.name == name {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleProperty {
    pub part_name: String,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventClass {
    ActionPerformed,
}

impl EventClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::ActionPerformed => "actionPerformed",
        }
    }

    pub fn parse(token: &str) -> Option<EventClass> {
        (token == "actionPerformed").then_some(EventClass::ActionPerformed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub class: EventClass,
    pub part_name: String,
}

/// Sets `property` of `part_name` to `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub property: String,
    pub part_name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorRule {
    pub event: Event,
    pub actions: Vec<Action>,
}

/// One complete interface: structure, style, behavior and peers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UiDocument {
    /// Root parts; only roots may be windows.
    pub parts: Vec<Part>,
    pub styles: Vec<StyleProperty>,
    pub behavior: Vec<BehaviorRule>,
    pub peers: Vec<RetrieveBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid UI document: {}", .problems.join("; "))]
pub struct InvalidDocument {
    pub problems: Vec<String>,
}

impl UiDocument {
    pub fn all_parts(&self) -> Vec<&Part> {
        self.parts.iter().flat_map(Part::walk).collect()
    }

    pub fn part(&self, name: &str) -> Option<&Part> {
        self.all_parts().into_iter().find(|p| p.name == name)
    }

    /// Style properties of one part, in document order.
    pub fn style_of(&self, part_name: &str) -> BTreeMap<&str, &str> {
        self.styles.iter().filter(|s| s.part_name == part_name).map(|s| (s.name.as_str(), s.value.as_str())).collect()
    }

    /// Checks the document invariants: unique part names, resolvable style and
    /// behavior references, the closed widget vocabulary with windows only at
    /// the roots, and at most one input per value id.
    pub fn check(&self) -> Result<(), InvalidDocument> {
        let mut problems = Vec::new();
        let mut names = BTreeSet::new();
        let mut bound = BTreeSet::new();
        for root in &self.parts {
            for (depth, part) in walk_with_depth(root, 0) {
                if !names.insert(part.name.as_str()) {
                    problems.push(format!("duplicate part name `{}`", part.name));
                }
                if !part.widget_class.is_known() {
                    problems.push(format!("part `{}` has unknown class `{}`", part.name, part.widget_class));
                }
                if part.widget_class == WidgetClass::JFrame && depth > 0 {
                    problems.push(format!("JFrame `{}` is not a root part", part.name));
                }
                if let Some(id) = &part.bound_value_id {
                    if !bound.insert(id.as_str()) {
                        problems.push(format!("value `{id}` is bound to more than one part"));
                    }
                }
            }
        }
        for style in &self.styles {
            if !names.contains(style.part_name.as_str()) {
                problems.push(format!("style `{}` targets unknown part `{}`", style.name, style.part_name));
            }
        }
        for rule in &self.behavior {
            if !names.contains(rule.event.part_name.as_str()) {
                problems.push(format!("rule event names unknown part `{}`", rule.event.part_name));
            }
            for action in &rule.actions {
                if !names.contains(action.part_name.as_str()) {
                    problems.push(format!("rule action targets unknown part `{}`", action.part_name));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(InvalidDocument { problems })
        }
    }
}

fn walk_with_depth(part: &Part, depth: usize) -> Vec<(usize, &Part)> {
    let mut out = vec![(depth, part)];
    for child in &part.children {
        out.extend(walk_with_depth(child, depth + 1));
    }
    out
}
