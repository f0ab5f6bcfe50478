//! Prewritten UI fragments with `{{slot}}` markers, filled from profile data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const ENTITY_SHELL: &str = "entity-shell";
pub const HELP_FRAME: &str = "help-frame";
pub const APP_SHELL: &str = "app-shell";
pub const REQUIRED_TEMPLATES: [&str; 3] = [ENTITY_SHELL, HELP_FRAME, APP_SHELL];

/// File suffix of template files inside a template directory.
pub const TEMPLATE_SUFFIX: &str = ".uiml.tpl";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template `{template}`: malformed slot marker at byte {offset}: {reason}")]
    Syntax { template: String, offset: usize, reason: &'static str },
    #[error("template `{template}`: no value for slot `{key}`")]
    MissingSlot { template: String, key: String },
    #[error("template set is missing `{0}`")]
    MissingTemplate(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(usize, usize),
    Slot(String),
}

/// A named, prewritten fragment and the slots it needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    raw_text: String,
    slots: BTreeSet<String>,
    segments: Vec<Segment>,
}

fn is_slot_key(key: &str) -> bool {
    let mut bytes = key.bytes();
    bytes.next().is_some_and(|b| b.is_ascii_lowercase() || b == b'_')
        && bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Scans `text` for `{{key}}` markers with keys matching `[a-z_][a-z0-9_]*`.
///
/// An unterminated `{{`, a stray `}}` or an invalid key is a syntax error.
pub fn load_template(name: &str, text: &str) -> Result<Template, TemplateError> {
    let syntax = |offset, reason| TemplateError::Syntax { template: name.to_string(), offset, reason };
    let mut segments = Vec::new();
    let mut slots = BTreeSet::new();
    let mut literal_start = 0;
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        if rest.starts_with("}}") {
            return Err(syntax(pos, "`}}` without opening `{{`"));
        }
        if !rest.starts_with("{{") {
            pos += rest.chars().next().map_or(1, char::len_utf8);
            continue;
        }
        let close = rest[2..].find("}}").ok_or_else(|| syntax(pos, "`{{` without closing `}}`"))?;
        let key = &rest[2..2 + close];
        if !is_slot_key(key) {
            return Err(syntax(pos, "slot key must match [a-z_][a-z0-9_]*"));
        }
        if literal_start < pos {
            segments.push(Segment::Literal(literal_start, pos));
        }
        segments.push(Segment::Slot(key.to_string()));
        slots.insert(key.to_string());
        pos += 2 + close + 2;
        literal_start = pos;
    }
    if literal_start < text.len() {
        segments.push(Segment::Literal(literal_start, text.len()));
    }
    Ok(Template { name: name.to_string(), raw_text: text.to_string(), slots, segments })
}

/// Escapes a slot value for XML text and attribute positions. Braces are
/// written as character references so no value can form a new marker.
pub fn escape_slot_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '{' => out.push_str("&#123;"),
            '}' => out.push_str("&#125;"),
            c => out.push(c),
        }
    }
    out
}

impl Template {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn slots(&self) -> &BTreeSet<String> {
        &self.slots
    }

    /// Replaces every marker with the escaped context value. Extra context
    /// keys are ignored.
    pub fn instantiate(&self, ctx: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.raw_text.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(start, end) => out.push_str(&self.raw_text[*start..*end]),
                Segment::Slot(key) => {
                    let value = ctx
                        .get(key)
                        .ok_or_else(|| TemplateError::MissingSlot { template: self.name.clone(), key: key.clone() })?;
                    out.push_str(&escape_slot_value(value));
                }
            }
        }
        Ok(out)
    }
}

pub fn instantiate(template: &Template, ctx: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    template.instantiate(ctx)
}

/// The templates a compile needs, keyed by name.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
}

impl TemplateSet {
    pub fn new(templates: impl IntoIterator<Item = Template>) -> Result<Self, TemplateError> {
        let templates: BTreeMap<String, Template> = templates.into_iter().map(|t| (t.name.clone(), t)).collect();
        if let Some(missing) = REQUIRED_TEMPLATES.iter().find(|n| !templates.contains_key(**n)) {
            return Err(TemplateError::MissingTemplate(missing.to_string()));
        }
        Ok(TemplateSet { templates })
    }

    /// The shipped templates, compiled into the binary.
    pub fn builtin() -> Self {
        let sources = [
            (ENTITY_SHELL, include_str!("../../../templates/entity-shell.uiml.tpl")),
            (HELP_FRAME, include_str!("../../../templates/help-frame.uiml.tpl")),
            (APP_SHELL, include_str!("../../../templates/app-shell.uiml.tpl")),
        ];
        let templates =
            sources.into_iter().map(|(name, text)| load_template(name, text).expect("shipped template is well formed"));
        TemplateSet::new(templates).expect("shipped set is complete")
    }

    /// Loads every `<name>.uiml.tpl` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let io =
            |path: &Path, e: std::io::Error| TemplateError::Io { path: path.to_path_buf(), message: e.to_string() };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(TEMPLATE_SUFFIX)))
            .collect();
        paths.sort();
        let mut templates = Vec::new();
        for path in paths {
            let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let name = &file_name[..file_name.len() - TEMPLATE_SUFFIX.len()];
            let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
            templates.push(load_template(name, &text)?);
        }
        TemplateSet::new(templates)
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub(crate) fn required(&self, name: &str) -> Result<&Template, TemplateError> {
        self.get(name).ok_or_else(|| TemplateError::MissingTemplate(name.to_string()))
    }
}
