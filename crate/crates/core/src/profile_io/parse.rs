use roxmltree::{Document, Node, ParsingOptions};

use super::diagnostic::{DiagnosticCode as Code, ProfileDiagnostic};
use super::XmlError;
use crate::model::{
    Descrip, ExtElement, ExtNode, MedComp, MethodParam, PatientProfile, RelationConstraint, RetrieveBinding,
    TriggerCondition, TriggerRule, ValueSpec, EXTENSION_NAMESPACE,
};
use crate::scalar::{CompareOp, Datatype, Scalar};

pub(crate) fn parse_xml(xml: &str) -> Result<Document<'_>, XmlError> {
    // Internal DTD subsets are tolerated; nothing external is ever fetched.
    let options = ParsingOptions { allow_dtd: true, ..ParsingOptions::default() };
    Document::parse_with_options(xml, options).map_err(|e| {
        let pos = e.pos();
        XmlError { line: pos.row, column: pos.col, message: e.to_string() }
    })
}

/// Structural pass: builds the model and reports schema violations with
/// document locations.
pub(crate) fn read_structure(xml: &str) -> Result<(PatientProfile, Vec<ProfileDiagnostic>), XmlError> {
    let doc = parse_xml(xml)?;
    let mut reader = Reader { diags: Vec::new() };
    let profile = reader.profile(doc.root_element());
    Ok((profile, reader.diags))
}

struct Reader {
    diags: Vec<ProfileDiagnostic>,
}

fn is_ext(node: Node) -> bool {
    node.tag_name().namespace() == Some(EXTENSION_NAMESPACE)
}

fn local<'a>(node: Node<'a, '_>) -> &'a str {
    node.tag_name().name()
}

/// Child elements of `node` paired with their XPath-like location.
fn children_with_paths<'a, 'i>(node: Node<'a, 'i>, path: &str) -> Vec<(Node<'a, 'i>, String)> {
    let mut counts: Vec<(String, usize)> = Vec::new();
    node.children()
        .filter(Node::is_element)
        .map(|child| {
            let name = if is_ext(child) { format!("ext:{}", local(child)) } else { local(child).to_string() };
            let n = match counts.iter_mut().find(|(k, _)| *k == name) {
                Some((_, n)) => {
                    *n += 1;
                    *n
                }
                None => {
                    counts.push((name.clone(), 1));
                    1
                }
            };
            (child, format!("{path}/{name}[{n}]"))
        })
        .collect()
}

impl Reader {
    fn push(&mut self, code: Code, location: &str, message: impl Into<String>) {
        self.diags.push(ProfileDiagnostic::new(code, location, message));
    }

    /// Rejects attributes outside `allowed` and returns the values of `allowed` in order.
    fn attrs<'a>(&mut self, node: Node<'a, '_>, path: &str, allowed: &[&str]) -> Vec<Option<&'a str>> {
        for attr in node.attributes() {
            if attr.namespace().is_some() || !allowed.contains(&attr.name()) {
                self.push(Code::UnknownAttribute, path, format!("unexpected attribute `{}`", attr.name()));
            }
        }
        allowed
            .iter()
            .map(|name| node.attributes().find(|a| a.namespace().is_none() && a.name() == *name).map(|a| a.value()))
            .collect()
    }

    fn required(&mut self, value: Option<&str>, path: &str, name: &str) -> String {
        match value {
            Some(v) => v.to_string(),
            None => {
                self.push(Code::MissingAttribute, path, format!("missing attribute `{name}`"));
                String::new()
            }
        }
    }

    fn datatype(&mut self, value: Option<&str>, path: &str, name: &str) -> Datatype {
        match value {
            Some(token) => token.parse().unwrap_or_else(|_| {
                self.push(Code::BadDatatype, path, format!("unknown datatype `{token}`"));
                Datatype::Char
            }),
            None => {
                self.push(Code::MissingAttribute, path, format!("missing attribute `{name}`"));
                Datatype::Char
            }
        }
    }

    fn op(&mut self, value: Option<&str>, path: &str) -> CompareOp {
        match value {
            Some(token) => token.parse().unwrap_or_else(|_| {
                self.push(Code::BadOp, path, format!("unknown operator `{token}`"));
                CompareOp::Eq
            }),
            None => {
                self.push(Code::MissingAttribute, path, "missing attribute `op`");
                CompareOp::Eq
            }
        }
    }

    /// Non-whitespace text directly inside a container element is an error.
    fn no_text(&mut self, node: Node, path: &str) {
        if node.children().any(|c| c.is_text() && !c.text().unwrap_or("").trim().is_empty()) {
            self.push(Code::UnexpectedText, path, "unexpected text content");
        }
    }

    /// Trimmed text of a leaf element; child elements are rejected.
    fn leaf_text(&mut self, node: Node, path: &str) -> String {
        let mut text = String::new();
        for child in node.children() {
            if child.is_element() {
                self.push(Code::UnknownElement, path, format!("unexpected element `{}`", local(child)));
            } else if child.is_text() {
                text.push_str(child.text().unwrap_or(""));
            }
        }
        text.trim().to_string()
    }

    fn unknown(&mut self, node: Node, path: &str) {
        self.push(Code::UnknownElement, path, format!("unexpected element `{}`", local(node)));
    }

    fn profile(&mut self, root: Node) -> PatientProfile {
        let path = "/profile";
        if local(root) != "profile" || root.tag_name().namespace().is_some() {
            self.push(Code::BadRoot, "/", format!("root element must be `profile`, found `{}`", local(root)));
            return PatientProfile::new("");
        }
        let [patient, version] = self.attrs(root, path, &["patient", "version"])[..] else { unreachable!() };
        let mut profile = PatientProfile::new(self.required(patient, path, "patient"));
        if let Some(v) = version {
            match v.parse::<u64>() {
                Ok(n) if v.bytes().all(|b| b.is_ascii_digit()) => profile.version = n,
                _ => self.push(Code::BadVersion, path, format!("version `{v}` is not a non-negative integer")),
            }
        }
        self.no_text(root, path);

        let mut sibling_peers = Vec::new();
        for (child, cpath) in children_with_paths(root, path) {
            if is_ext(child) {
                if let Some(ext) = self.extension(child, &cpath) {
                    profile.extensions.push(ext);
                }
                continue;
            }
            match local(child) {
                "medComp" => {
                    let mc = self.medcomp(child, &cpath);
                    profile.medcomps.push(mc);
                }
                "peers" => sibling_peers.extend(self.peers(child, &cpath)),
                "relation" => {
                    let [op, left, right] = self.attrs(child, &cpath, &["op", "left", "right"])[..] else {
                        unreachable!()
                    };
                    self.no_children(child, &cpath);
                    profile.relations.push(RelationConstraint {
                        op: self.op(op, &cpath),
                        left: self.required(left, &cpath, "left"),
                        right: self.required(right, &cpath, "right"),
                    });
                }
                "trigger" => {
                    if let Some(t) = self.trigger(child, &cpath) {
                        profile.triggers.push(t);
                    }
                }
                _ => self.unknown(child, &cpath),
            }
        }

        for (binding, rpath) in sibling_peers {
            let owner = profile.medcomps.iter_mut().find(|mc| mc.values.iter().any(|v| v.id == binding.idref));
            match owner {
                Some(mc) => mc.retrieves.push(binding),
                None => {
                    self.push(Code::DanglingIdref, &rpath, format!("idref `{}` does not name a value", binding.idref))
                }
            }
        }
        profile
    }

    fn no_children(&mut self, node: Node, path: &str) {
        for child in node.children() {
            if child.is_element() {
                self.unknown(child, path);
            }
        }
        self.no_text(node, path);
    }

    fn medcomp(&mut self, node: Node, path: &str) -> MedComp {
        let [id, key] = self.attrs(node, path, &["id", "key"])[..] else { unreachable!() };
        let mut mc = MedComp::new(self.required(id, path, "id"), String::new());
        mc.key = key.map(str::to_string);
        self.no_text(node, path);
        let mut seen_name = false;
        let mut nested_peers = Vec::new();
        for (child, cpath) in children_with_paths(node, path) {
            if is_ext(child) {
                if let Some(ext) = self.extension(child, &cpath) {
                    mc.extensions.push(ext);
                }
                continue;
            }
            match local(child) {
                "name" => {
                    self.attrs(child, &cpath, &[]);
                    if seen_name {
                        self.push(Code::DuplicateElement, &cpath, "medComp has more than one name");
                    }
                    seen_name = true;
                    mc.name = self.leaf_text(child, &cpath);
                }
                "state" => {
                    self.attrs(child, &cpath, &[]);
                    if mc.state.is_some() {
                        self.push(Code::DuplicateElement, &cpath, "medComp has more than one state");
                    }
                    mc.state = Some(self.leaf_text(child, &cpath));
                }
                "help" => {
                    self.attrs(child, &cpath, &[]);
                    if mc.help_text.is_some() {
                        self.push(Code::DuplicateElement, &cpath, "medComp has more than one help");
                    }
                    mc.help_text = Some(self.leaf_text(child, &cpath));
                }
                "value" => {
                    let v = self.value(child, &cpath);
                    mc.values.push(v);
                }
                "peers" => nested_peers.extend(self.peers(child, &cpath)),
                _ => self.unknown(child, &cpath),
            }
        }
        if !seen_name {
            self.push(Code::MissingElement, path, "medComp has no name");
        }
        mc.retrieves.extend(nested_peers.into_iter().map(|(b, _)| b));
        mc
    }

    fn value(&mut self, node: Node, path: &str) -> ValueSpec {
        let [id, datatype] = self.attrs(node, path, &["id", "datatype"])[..] else { unreachable!() };
        let datatype = self.datatype(datatype, path, "datatype");
        let mut v = ValueSpec::new(self.required(id, path, "id"), datatype);
        self.no_text(node, path);
        for (child, cpath) in children_with_paths(node, path) {
            if is_ext(child) {
                if let Some(ext) = self.extension(child, &cpath) {
                    v.extensions.push(ext);
                }
                continue;
            }
            match local(child) {
                "descrip" => {
                    let [ty, class] = self.attrs(child, &cpath, &["type", "class"])[..] else { unreachable!() };
                    let descrip = Descrip {
                        type_tag: self.required(ty, &cpath, "type"),
                        class_tag: self.required(class, &cpath, "class"),
                        text: self.leaf_text(child, &cpath),
                    };
                    v.descrips.push(descrip);
                }
                "bound" => {
                    let [ty] = self.attrs(child, &cpath, &["type"])[..] else { unreachable!() };
                    let literal = self.leaf_text(child, &cpath);
                    let slot = match ty {
                        Some("min") => &mut v.bounds.min,
                        Some("max") => &mut v.bounds.max,
                        Some(other) => {
                            self.push(
                                Code::BadBoundType,
                                &cpath,
                                format!("bound type must be min or max, got `{other}`"),
                            );
                            continue;
                        }
                        None => {
                            self.push(Code::MissingAttribute, &cpath, "missing attribute `type`");
                            continue;
                        }
                    };
                    if slot.is_some() {
                        self.diags.push(ProfileDiagnostic::new(
                            Code::DupBound,
                            &cpath,
                            format!("more than one {} bound", ty.unwrap_or_default()),
                        ));
                        continue;
                    }
                    match Scalar::parse(&literal, datatype) {
                        Some(scalar) => *slot = Some(scalar),
                        None => self.diags.push(ProfileDiagnostic::new(
                            Code::BadBoundLiteral,
                            &cpath,
                            format!("`{literal}` is not a valid {datatype} literal"),
                        )),
                    }
                }
                _ => self.unknown(child, &cpath),
            }
        }
        v
    }

    fn peers(&mut self, node: Node, path: &str) -> Vec<(RetrieveBinding, String)> {
        self.attrs(node, path, &[]);
        self.no_text(node, path);
        let mut out = Vec::new();
        for (child, cpath) in children_with_paths(node, path) {
            if local(child) != "retrieve" || is_ext(child) {
                self.unknown(child, &cpath);
                continue;
            }
            if let Some(binding) = self.retrieve(child, &cpath) {
                out.push((binding, cpath));
            }
        }
        out
    }

    fn retrieve(&mut self, node: Node, path: &str) -> Option<RetrieveBinding> {
        let [idref, ty] = self.attrs(node, path, &["idref", "type"])[..] else { unreachable!() };
        let idref = self.required(idref, path, "idref");
        let type_tag = self.required(ty, path, "type");
        self.no_text(node, path);
        let mut method = None;
        for (child, cpath) in children_with_paths(node, path) {
            if local(child) != "method" || is_ext(child) {
                self.unknown(child, &cpath);
            } else if method.is_some() {
                self.push(Code::DuplicateElement, &cpath, "retrieve has more than one method");
            } else {
                method = Some(self.method(child, &cpath));
            }
        }
        let Some((method_name, params, return_datatype)) = method else {
            self.push(Code::MissingElement, path, "retrieve has no method");
            return None;
        };
        Some(RetrieveBinding { idref, type_tag, method_name, params, return_datatype })
    }

    fn method(&mut self, node: Node, path: &str) -> (String, Vec<MethodParam>, Datatype) {
        self.attrs(node, path, &[]);
        self.no_text(node, path);
        let mut name = None;
        let mut params = Vec::new();
        let mut ret = None;
        for (child, cpath) in children_with_paths(node, path) {
            if is_ext(child) {
                self.unknown(child, &cpath);
                continue;
            }
            match local(child) {
                "name" => {
                    self.attrs(child, &cpath, &[]);
                    if name.is_some() {
                        self.push(Code::DuplicateElement, &cpath, "method has more than one name");
                    }
                    name = Some(self.leaf_text(child, &cpath));
                }
                "param" => {
                    let [dt, pname] = self.attrs(child, &cpath, &["datatype", "name"])[..] else { unreachable!() };
                    self.no_children(child, &cpath);
                    params.push(MethodParam {
                        datatype: self.datatype(dt, &cpath, "datatype"),
                        name: self.required(pname, &cpath, "name"),
                    });
                }
                "return" => {
                    let [dt] = self.attrs(child, &cpath, &["datatype"])[..] else { unreachable!() };
                    self.no_children(child, &cpath);
                    if ret.is_some() {
                        self.push(Code::DuplicateElement, &cpath, "method has more than one return");
                    }
                    ret = Some(self.datatype(dt, &cpath, "datatype"));
                }
                _ => self.unknown(child, &cpath),
            }
        }
        if name.is_none() {
            self.push(Code::MissingElement, path, "method has no name");
        }
        if ret.is_none() {
            self.push(Code::MissingElement, path, "method has no return");
        }
        (name.unwrap_or_default(), params, ret.unwrap_or(Datatype::Char))
    }

    fn trigger(&mut self, node: Node, path: &str) -> Option<TriggerRule> {
        self.attrs(node, path, &[]);
        self.no_text(node, path);
        let mut condition = None;
        let mut require = Vec::new();
        for (child, cpath) in children_with_paths(node, path) {
            if is_ext(child) {
                self.unknown(child, &cpath);
                continue;
            }
            match local(child) {
                "when" => {
                    let [idref, op, value] = self.attrs(child, &cpath, &["idref", "op", "value"])[..] else {
                        unreachable!()
                    };
                    self.no_children(child, &cpath);
                    if condition.is_some() {
                        self.push(Code::DuplicateElement, &cpath, "trigger has more than one when");
                    }
                    condition = Some(TriggerCondition {
                        value_id: self.required(idref, &cpath, "idref"),
                        op: self.op(op, &cpath),
                        literal: self.required(value, &cpath, "value"),
                    });
                }
                "require" => {
                    let [idref] = self.attrs(child, &cpath, &["idref"])[..] else { unreachable!() };
                    self.no_children(child, &cpath);
                    require.push(self.required(idref, &cpath, "idref"));
                }
                _ => self.unknown(child, &cpath),
            }
        }
        match condition {
            Some(condition) => Some(TriggerRule { condition, require }),
            None => {
                self.push(Code::MissingElement, path, "trigger has no when");
                None
            }
        }
    }

    fn extension(&mut self, node: Node, path: &str) -> Option<ExtElement> {
        let mut ext = ExtElement { name: local(node).to_string(), attributes: Vec::new(), children: Vec::new() };
        let mut ok = true;
        for attr in node.attributes() {
            if attr.namespace().is_some() {
                self.push(Code::UnknownAttribute, path, format!("namespaced attribute `{}` in extension", attr.name()));
                ok = false;
            } else {
                ext.attributes.push((attr.name().to_string(), attr.value().to_string()));
            }
        }
        let mut index = 0;
        for child in node.children() {
            if child.is_element() {
                index += 1;
                let cpath = format!("{path}/*[{index}]");
                if !is_ext(child) {
                    self.unknown(child, &cpath);
                    ok = false;
                } else if let Some(e) = self.extension(child, &cpath) {
                    ext.children.push(ExtNode::Element(e));
                } else {
                    ok = false;
                }
            } else if child.is_text() {
                let text = child.text().unwrap_or("");
                if text.trim().is_empty() {
                    continue;
                }
                if let Some(ExtNode::Text(prev)) = ext.children.last_mut() {
                    prev.push_str(text);
                } else {
                    ext.children.push(ExtNode::Text(text.to_string()));
                }
            }
        }
        ok.then_some(ext)
    }
}
