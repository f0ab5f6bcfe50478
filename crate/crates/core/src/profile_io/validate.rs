use std::collections::{BTreeMap, BTreeSet};

use super::diagnostic::{DiagnosticCode as Code, ProfileDiagnostic};
use crate::model::{is_valid_key, key_from_name, BoundKind, ExtElement, ExtNode, MedComp, PatientProfile};
use crate::scalar::Scalar;

/// Patient ids double as storage directory names.
pub fn is_valid_patient_id(id: &str) -> bool {
    let mut chars = id.chars();
    id.len() <= 64
        && chars.next().is_some_and(|c| c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

pub(crate) fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

pub(crate) fn is_xml_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

struct Checker {
    out: Vec<ProfileDiagnostic>,
}

impl Checker {
    fn push(&mut self, code: Code, location: &str, message: impl Into<String>) {
        self.out.push(ProfileDiagnostic::new(code, location, message));
    }

    /// Attribute-like strings: any XML character is representable.
    fn attr_text(&mut self, location: &str, what: &str, s: &str) {
        if !s.chars().all(is_xml_char) {
            self.push(Code::BadText, location, format!("{what} contains characters not allowed in XML"));
        }
    }

    /// Element text is trimmed when parsed, so it must already be trimmed.
    fn element_text(&mut self, location: &str, what: &str, s: &str) {
        if !s.chars().all(is_xml_char) || s.trim() != s {
            self.push(
                Code::BadText,
                location,
                format!("{what} has surrounding whitespace or characters not allowed in XML"),
            );
        }
    }

    fn id(&mut self, location: &str, what: &str, id: &str) {
        if id.is_empty() {
            self.push(Code::EmptyId, location, format!("{what} is empty"));
        } else {
            self.attr_text(location, what, id);
        }
    }

    fn extensions(&mut self, location: &str, extensions: &[ExtElement]) {
        for ext in extensions {
            if !ext_is_canonical(ext) {
                self.push(
                    Code::BadText,
                    location,
                    format!("extension element `{}` cannot be represented canonically", ext.name),
                );
            }
        }
    }
}

fn ext_is_canonical(ext: &ExtElement) -> bool {
    let mut prev_text = false;
    is_xml_name(&ext.name)
        && ext.attributes.iter().all(|(k, v)| is_xml_name(k) && v.chars().all(is_xml_char))
        && ext.attributes.iter().map(|(k, _)| k).collect::<BTreeSet<_>>().len() == ext.attributes.len()
        && ext.children.iter().all(|child| match child {
            ExtNode::Element(e) => {
                prev_text = false;
                ext_is_canonical(e)
            }
            ExtNode::Text(t) => {
                let ok = !prev_text && !t.trim().is_empty() && t.chars().all(is_xml_char);
                prev_text = true;
                ok
            }
        })
}

/// Checks every structural and typing invariant of `profile`.
///
/// Diagnostics follow the canonical document order: medcomps and their
/// values, then peers, relations and triggers. An empty result means the
/// profile is valid.
pub fn validate_profile(profile: &PatientProfile) -> Vec<ProfileDiagnostic> {
    let mut c = Checker { out: Vec::new() };
    let root = "/profile";

    if !is_valid_patient_id(&profile.patient_id) {
        c.push(
            Code::BadPatientId,
            root,
            format!("patient id `{}` must match [A-Za-z0-9][A-Za-z0-9_.-]* (max 64)", profile.patient_id),
        );
    }
    c.extensions(root, &profile.extensions);

    // value id -> (datatype, owning medcomp index); first occurrence wins
    let mut value_owner = BTreeMap::new();
    let mut medcomp_ids = BTreeSet::new();
    let mut bound_values: BTreeMap<&str, usize> = BTreeMap::new();
    for mc in &profile.medcomps {
        for r in &mc.retrieves {
            *bound_values.entry(r.idref.as_str()).or_default() += 1;
        }
    }

    for (i, mc) in profile.medcomps.iter().enumerate() {
        let loc = format!("{root}/medComp[{}]", i + 1);
        c.id(&loc, "medComp id", &mc.id);
        if !mc.id.is_empty() && !medcomp_ids.insert(mc.id.as_str()) {
            c.push(Code::DupMedcompId, &loc, format!("duplicate medComp id `{}`", mc.id));
        }
        check_medcomp_text(&mut c, &loc, mc);
        if mc.values.is_empty() {
            c.push(Code::MissingValue, &loc, "medComp must declare at least one value");
        }
        c.extensions(&loc, &mc.extensions);

        for (j, v) in mc.values.iter().enumerate() {
            let vloc = format!("{loc}/value[{}]", j + 1);
            c.id(&vloc, "value id", &v.id);
            if value_owner.contains_key(v.id.as_str()) {
                c.push(Code::DupValueId, &vloc, format!("duplicate value id `{}`", v.id));
            } else {
                value_owner.insert(v.id.as_str(), (v.datatype, i));
            }
            for (k, d) in v.descrips.iter().enumerate() {
                let dloc = format!("{vloc}/descrip[{}]", k + 1);
                c.attr_text(&dloc, "descrip type", &d.type_tag);
                c.attr_text(&dloc, "descrip class", &d.class_tag);
                c.element_text(&dloc, "descrip text", &d.text);
            }
            for (kind, bound) in [(BoundKind::Min, &v.bounds.min), (BoundKind::Max, &v.bounds.max)] {
                let Some(bound) = bound else { continue };
                let bloc = format!("{vloc}/bound[@type=\"{}\"]", kind.as_str());
                if !v.datatype.is_ordered() {
                    c.push(Code::BoundNotComparable, &bloc, format!("bounds are not allowed on {} values", v.datatype));
                } else if bound.datatype() != v.datatype {
                    c.push(
                        Code::BadBoundLiteral,
                        &bloc,
                        format!("{} bound is {}, value is {}", kind.as_str(), bound.datatype(), v.datatype),
                    );
                } else if let Scalar::Text(t) = bound {
                    c.element_text(&bloc, "bound", t);
                }
            }
            if let (Some(min), Some(max)) = (&v.bounds.min, &v.bounds.max) {
                if min.order(max) == Some(std::cmp::Ordering::Greater) {
                    c.push(Code::BoundOrder, &vloc, format!("min bound {min} exceeds max bound {max}"));
                }
            }
            c.extensions(&vloc, &v.extensions);
            if !bound_values.contains_key(v.id.as_str()) {
                c.push(Code::MissingRetrieve, &vloc, format!("value `{}` has no retrieve binding in peers", v.id));
            }
        }
    }

    let mut seen_bindings = BTreeSet::new();
    let mut k = 0;
    for (i, mc) in profile.medcomps.iter().enumerate() {
        for r in &mc.retrieves {
            k += 1;
            let rloc = format!("{root}/peers/retrieve[{k}]");
            c.attr_text(&rloc, "retrieve type", &r.type_tag);
            c.element_text(&rloc, "method name", &r.method_name);
            for p in &r.params {
                c.attr_text(&rloc, "param name", &p.name);
            }
            match value_owner.get(r.idref.as_str()) {
                Some(&(datatype, owner)) if owner == i => {
                    if datatype != r.return_datatype {
                        c.push(
                            Code::ReturnTypeMismatch,
                            &rloc,
                            format!("returns {} but value `{}` is {}", r.return_datatype, r.idref, datatype),
                        );
                    }
                    if !seen_bindings.insert(r.idref.as_str()) {
                        c.push(Code::DupRetrieve, &rloc, format!("value `{}` is bound more than once", r.idref));
                    }
                }
                Some(_) => {
                    c.push(Code::DanglingIdref, &rloc, format!("idref `{}` belongs to a different medComp", r.idref))
                }
                None => c.push(Code::DanglingIdref, &rloc, format!("idref `{}` does not name a value", r.idref)),
            }
        }
    }

    for (i, rel) in profile.relations.iter().enumerate() {
        let loc = format!("{root}/relation[{}]", i + 1);
        let left = value_owner.get(rel.left.as_str()).map(|v| v.0);
        let right = value_owner.get(rel.right.as_str()).map(|v| v.0);
        for (id, found) in [(&rel.left, left), (&rel.right, right)] {
            if found.is_none() {
                c.push(Code::DanglingIdref, &loc, format!("idref `{id}` does not name a value"));
            }
        }
        if let (Some(l), Some(r)) = (left, right) {
            if l != r || !l.is_ordered() {
                c.push(
                    Code::BadRelationTypes,
                    &loc,
                    format!("cannot compare {l} with {r}; both sides must share an ordered datatype"),
                );
            }
        }
    }

    for (i, trig) in profile.triggers.iter().enumerate() {
        let loc = format!("{root}/trigger[{}]", i + 1);
        let cond = &trig.condition;
        c.attr_text(&loc, "trigger literal", &cond.literal);
        match value_owner.get(cond.value_id.as_str()) {
            None => c.push(Code::DanglingIdref, &loc, format!("idref `{}` does not name a value", cond.value_id)),
            Some(&(datatype, _)) => {
                if Scalar::parse(&cond.literal, datatype).is_none() {
                    c.push(
                        Code::BadTriggerLiteral,
                        &loc,
                        format!("`{}` is not a valid {datatype} literal", cond.literal),
                    );
                }
                if !cond.op.is_equality() && !datatype.is_ordered() {
                    c.push(
                        Code::BadTriggerOp,
                        &loc,
                        format!("operator {} needs an ordered datatype, value is {datatype}", cond.op),
                    );
                }
            }
        }
        for id in &trig.require {
            if !value_owner.contains_key(id.as_str()) {
                c.push(Code::DanglingIdref, &loc, format!("idref `{id}` does not name a value"));
            }
        }
        if trig.require.is_empty() {
            c.push(Code::EmptyTrigger, &loc, "trigger requires no values");
        }
    }

    c.out
}

fn check_medcomp_text(c: &mut Checker, loc: &str, mc: &MedComp) {
    c.element_text(&format!("{loc}/name"), "name", &mc.name);
    if mc.key.is_none() && key_from_name(&mc.name).is_none() {
        c.push(Code::BadName, &format!("{loc}/name"), format!("name `{}` yields no entity key", mc.name));
    }
    if let Some(key) = &mc.key {
        if !is_valid_key(key) {
            c.push(Code::BadKey, loc, format!("key `{key}` must match [A-Za-z][A-Za-z0-9]*"));
        }
    }
    if let Some(state) = &mc.state {
        c.element_text(&format!("{loc}/state"), "state", state);
    }
    if let Some(help) = &mc.help_text {
        c.element_text(&format!("{loc}/help"), "help", help);
    }
}
