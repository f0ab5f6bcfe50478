use roxmltree::Node;
use thiserror::Error;

use super::{Action, BehaviorRule, Event, EventClass, InvalidDocument, Part, StyleProperty, UiDocument, WidgetClass};
use crate::model::{MethodParam, RetrieveBinding};
use crate::profile_io::{parse_xml, XmlError};
use crate::scalar::Datatype;
use crate::xmlw::XmlWriter;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UiParseError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("{path}: {message}")]
    Structure { path: String, message: String },
}

fn structure_error(path: &str, message: impl Into<String>) -> UiParseError {
    UiParseError::Structure { path: path.to_string(), message: message.into() }
}

/// Canonical UIML-subset text of `doc`.
pub fn serialize_ui(doc: &UiDocument) -> Result<String, InvalidDocument> {
    doc.check()?;
    let mut w = XmlWriter::new();
    w.open("uiml", &[]);
    w.open("interface", &[]);
    if doc.parts.is_empty() {
        w.empty("structure", &[]);
    } else {
        w.open("structure", &[]);
        for part in &doc.parts {
            write_part(&mut w, part);
        }
        w.close("structure");
    }
    if doc.styles.is_empty() {
        w.empty("style", &[]);
    } else {
        w.open("style", &[]);
        for s in &doc.styles {
            w.text_element("property", &[("name", &s.name), ("part-name", &s.part_name)], &s.value);
        }
        w.close("style");
    }
    if doc.behavior.is_empty() {
        w.empty("behavior", &[]);
    } else {
        w.open("behavior", &[]);
        for rule in &doc.behavior {
            w.open("rule", &[]);
            w.open("condition", &[]);
            w.empty("event", &[("class", rule.event.class.as_str()), ("part-name", &rule.event.part_name)]);
            w.close("condition");
            w.open("action", &[]);
            for a in &rule.actions {
                w.text_element("property", &[("name", &a.property), ("part-name", &a.part_name)], &a.value);
            }
            w.close("action");
            w.close("rule");
        }
        w.close("behavior");
    }
    w.close("interface");
    if doc.peers.is_empty() {
        w.empty("peers", &[]);
    } else {
        w.open("peers", &[]);
        for r in &doc.peers {
            w.open("retrieve", &[("idref", &r.idref), ("type", &r.type_tag)]);
            w.open("method", &[]);
            w.text_element("name", &[], &r.method_name);
            for p in &r.params {
                w.empty("param", &[("datatype", p.datatype.as_str()), ("name", &p.name)]);
            }
            w.empty("return", &[("datatype", r.return_datatype.as_str())]);
            w.close("method");
            w.close("retrieve");
        }
        w.close("peers");
    }
    w.close("uiml");
    Ok(w.finish())
}

fn write_part(w: &mut XmlWriter, part: &Part) {
    let mut attrs = vec![("class", part.widget_class.as_str()), ("name", part.name.as_str())];
    if let Some(id) = &part.bound_value_id {
        attrs.push(("value-id", id.as_str()));
    }
    if part.children.is_empty() {
        w.empty("part", &attrs);
    } else {
        w.open("part", &attrs);
        for child in &part.children {
            write_part(w, child);
        }
        w.close("part");
    }
}

/// Parses a UIML-subset document. Unknown widget classes are kept so that
/// hand-written documents can be inspected; [`UiDocument::check`] and
/// lowering reject them.
pub fn parse_ui(xml: &str) -> Result<UiDocument, UiParseError> {
    let doc = parse_xml(xml)?;
    let root = doc.root_element();
    if root.tag_name().name() != "uiml" {
        return Err(structure_error("/", "root element must be `uiml`"));
    }
    let mut out = UiDocument::default();
    let mut reader = FragmentReader::new(&[]);
    for child in elements(root) {
        match child.tag_name().name() {
            "interface" => {
                for section in elements(child) {
                    reader.section(section, "/uiml/interface")?;
                }
            }
            "peers" => {
                for r in elements(child) {
                    out.peers.push(retrieve(r)?);
                }
            }
            other => return Err(structure_error("/uiml", format!("unexpected element `{other}`"))),
        }
    }
    out.parts = reader.parts;
    out.styles = reader.styles;
    out.behavior = reader.rules;
    Ok(out)
}

/// A parsed template instance: parts, styles and rules, plus where the
/// compiler should insert generated children.
#[derive(Debug, Default)]
pub(crate) struct Fragment {
    pub parts: Vec<Part>,
    pub styles: Vec<StyleProperty>,
    pub rules: Vec<BehaviorRule>,
    /// (placeholder element, parent part name, child index)
    pub insertions: Vec<(String, String, usize)>,
}

pub(crate) fn parse_fragment(xml: &str, placeholders: &[&str]) -> Result<Fragment, UiParseError> {
    let doc = parse_xml(xml)?;
    let root = doc.root_element();
    if root.tag_name().name() != "template" {
        return Err(structure_error("/", "template root element must be `template`"));
    }
    let mut reader = FragmentReader::new(placeholders);
    for section in elements(root) {
        reader.section(section, "/template")?;
    }
    Ok(Fragment { parts: reader.parts, styles: reader.styles, rules: reader.rules, insertions: reader.insertions })
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

fn attr<'a>(node: Node<'a, '_>, name: &str, path: &str) -> Result<&'a str, UiParseError> {
    node.attribute(name)
        .ok_or_else(|| structure_error(path, format!("`{}` is missing attribute `{name}`", node.tag_name().name())))
}

fn text(node: Node) -> String {
    node.children().filter_map(|c| c.text()).collect()
}

struct FragmentReader<'p> {
    placeholders: &'p [&'p str],
    parts: Vec<Part>,
    styles: Vec<StyleProperty>,
    rules: Vec<BehaviorRule>,
    insertions: Vec<(String, String, usize)>,
}

impl<'p> FragmentReader<'p> {
    fn new(placeholders: &'p [&'p str]) -> Self {
        FragmentReader {
            placeholders,
            parts: Vec::new(),
            styles: Vec::new(),
            rules: Vec::new(),
            insertions: Vec::new(),
        }
    }

    fn section(&mut self, node: Node, path: &str) -> Result<(), UiParseError> {
        let name = node.tag_name().name();
        let path = format!("{path}/{name}");
        match name {
            "structure" => {
                for child in elements(node) {
                    if child.tag_name().name() != "part" {
                        return Err(structure_error(&path, "structure may only contain parts"));
                    }
                    let part = self.part(child, &path)?;
                    self.parts.push(part);
                }
            }
            "style" => {
                for prop in elements(node) {
                    if prop.tag_name().name() != "property" {
                        return Err(structure_error(&path, "style may only contain properties"));
                    }
                    self.styles.push(StyleProperty {
                        part_name: attr(prop, "part-name", &path)?.to_string(),
                        name: attr(prop, "name", &path)?.to_string(),
                        value: text(prop),
                    });
                }
            }
            "behavior" => {
                for rule in elements(node) {
                    if rule.tag_name().name() != "rule" {
                        return Err(structure_error(&path, "behavior may only contain rules"));
                    }
                    let rule = self.rule(rule, &path)?;
                    self.rules.push(rule);
                }
            }
            other => return Err(structure_error(&path, format!("unexpected section `{other}`"))),
        }
        Ok(())
    }

    fn part(&mut self, node: Node, path: &str) -> Result<Part, UiParseError> {
        let mut part = Part::new(WidgetClass::parse(attr(node, "class", path)?), attr(node, "name", path)?);
        part.bound_value_id = node.attribute("value-id").map(str::to_string);
        let path = format!("{path}/part[@name=\"{}\"]", part.name);
        for child in elements(node) {
            match child.tag_name().name() {
                "part" => {
                    let p = self.part(child, &path)?;
                    part.children.push(p);
                }
                "style" => {
                    for prop in elements(child) {
                        if prop.tag_name().name() != "property" {
                            return Err(structure_error(&path, "style may only contain properties"));
                        }
                        if let Some(target) = prop.attribute("part-name") {
                            if target != part.name {
                                return Err(structure_error(&path, "nested style must target its own part"));
                            }
                        }
                        self.styles.push(StyleProperty {
                            part_name: part.name.clone(),
                            name: attr(prop, "name", &path)?.to_string(),
                            value: text(prop),
                        });
                    }
                }
                p if self.placeholders.contains(&p) => {
                    self.insertions.push((p.to_string(), part.name.clone(), part.children.len()));
                }
                other => return Err(structure_error(&path, format!("unexpected element `{other}`"))),
            }
        }
        Ok(part)
    }

    fn rule(&mut self, node: Node, path: &str) -> Result<BehaviorRule, UiParseError> {
        let path = format!("{path}/rule");
        let mut event = None;
        let mut actions = Vec::new();
        for child in elements(node) {
            match child.tag_name().name() {
                "condition" => {
                    let events: Vec<Node> = elements(child).collect();
                    let [ev] = events[..] else {
                        return Err(structure_error(&path, "condition must hold exactly one event"));
                    };
                    let class_token = attr(ev, "class", &path)?;
                    let class = EventClass::parse(class_token)
                        .ok_or_else(|| structure_error(&path, format!("unsupported event class `{class_token}`")))?;
                    event = Some(Event { class, part_name: attr(ev, "part-name", &path)?.to_string() });
                }
                "action" => {
                    for prop in elements(child) {
                        if prop.tag_name().name() != "property" {
                            return Err(structure_error(&path, "action may only set properties"));
                        }
                        actions.push(Action {
                            property: attr(prop, "name", &path)?.to_string(),
                            part_name: attr(prop, "part-name", &path)?.to_string(),
                            value: text(prop),
                        });
                    }
                }
                other => return Err(structure_error(&path, format!("unexpected element `{other}`"))),
            }
        }
        let event = event.ok_or_else(|| structure_error(&path, "rule has no condition"))?;
        Ok(BehaviorRule { event, actions })
    }
}

fn datatype_attr(node: Node, path: &str) -> Result<Datatype, UiParseError> {
    let token = attr(node, "datatype", path)?;
    token.parse().map_err(|_| structure_error(path, format!("unknown datatype `{token}`")))
}

fn retrieve(node: Node) -> Result<RetrieveBinding, UiParseError> {
    let path = "/uiml/peers/retrieve";
    if node.tag_name().name() != "retrieve" {
        return Err(structure_error("/uiml/peers", "peers may only contain retrieve elements"));
    }
    let method = elements(node)
        .find(|n| n.tag_name().name() == "method")
        .ok_or_else(|| structure_error(path, "retrieve has no method"))?;
    let mut binding = RetrieveBinding {
        idref: attr(node, "idref", path)?.to_string(),
        type_tag: attr(node, "type", path)?.to_string(),
        method_name: String::new(),
        params: Vec::new(),
        return_datatype: Datatype::Char,
    };
    let mut has_return = false;
    for child in elements(method) {
        match child.tag_name().name() {
            "name" => binding.method_name = text(child).trim().to_string(),
            "param" => binding.params.push(MethodParam {
                datatype: datatype_attr(child, path)?,
                name: attr(child, "name", path)?.to_string(),
            }),
            "return" => {
                binding.return_datatype = datatype_attr(child, path)?;
                has_return = true;
            }
            other => return Err(structure_error(path, format!("unexpected element `{other}`"))),
        }
    }
    if !has_return {
        return Err(structure_error(path, "method has no return"));
    }
    Ok(binding)
}
