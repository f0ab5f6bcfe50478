use super::validate::validate_profile;
use super::{ProfileDiagnostic, ValidationError};
use crate::model::{BoundKind, ExtElement, ExtNode, PatientProfile};
use crate::xmlw::{escape_attr, escape_text, XmlWriter};

const EXT_PREFIX: &str = "ext";

/// Canonical profile document.
///
/// Attribute order is fixed, peers are emitted as one trailing sibling block
/// and extension elements use the `ext` prefix.
pub fn serialize_profile(profile: &PatientProfile) -> Result<String, ValidationError> {
    let diagnostics: Vec<ProfileDiagnostic> = validate_profile(profile);
    if super::has_errors(&diagnostics) {
        return Err(ValidationError { diagnostics });
    }
    Ok(write_profile(profile))
}

pub(crate) fn write_profile(profile: &PatientProfile) -> String {
    let mut w = XmlWriter::new();
    let version = profile.version.to_string();
    let mut attrs = vec![("patient", profile.patient_id.as_str()), ("version", version.as_str())];
    if uses_extensions(profile) {
        attrs.push(("xmlns:ext", crate::model::EXTENSION_NAMESPACE));
    }
    let has_retrieves = profile.medcomps.iter().any(|mc| !mc.retrieves.is_empty());
    if profile.medcomps.is_empty()
        && profile.relations.is_empty()
        && profile.triggers.is_empty()
        && profile.extensions.is_empty()
    {
        w.empty("profile", &attrs);
        return w.finish();
    }

    w.open("profile", &attrs);
    for mc in &profile.medcomps {
        let mut mc_attrs = vec![("id", mc.id.as_str())];
        if let Some(key) = &mc.key {
            mc_attrs.push(("key", key.as_str()));
        }
        w.open("medComp", &mc_attrs);
        w.text_element("name", &[], &mc.name);
        if let Some(state) = &mc.state {
            w.text_element("state", &[], state);
        }
        if let Some(help) = &mc.help_text {
            w.text_element("help", &[], help);
        }
        for v in &mc.values {
            let attrs = [("id", v.id.as_str()), ("datatype", v.datatype.as_str())];
            let bounds = [(BoundKind::Min, &v.bounds.min), (BoundKind::Max, &v.bounds.max)];
            let has_children =
                !v.descrips.is_empty() || bounds.iter().any(|(_, b)| b.is_some()) || !v.extensions.is_empty();
            if !has_children {
                w.empty("value", &attrs);
                continue;
            }
            w.open("value", &attrs);
            for d in &v.descrips {
                w.text_element("descrip", &[("type", &d.type_tag), ("class", &d.class_tag)], &d.text);
            }
            for (kind, bound) in bounds {
                if let Some(bound) = bound {
                    w.text_element("bound", &[("type", kind.as_str())], &bound.to_string());
                }
            }
            write_extensions(&mut w, &v.extensions);
            w.close("value");
        }
        write_extensions(&mut w, &mc.extensions);
        w.close("medComp");
    }

    if has_retrieves {
        w.open("peers", &[]);
        for r in profile.medcomps.iter().flat_map(|mc| &mc.retrieves) {
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

    for rel in &profile.relations {
        w.empty("relation", &[("op", rel.op.as_str()), ("left", &rel.left), ("right", &rel.right)]);
    }
    for trig in &profile.triggers {
        let cond = &trig.condition;
        w.open("trigger", &[]);
        w.empty("when", &[("idref", &cond.value_id), ("op", cond.op.as_str()), ("value", &cond.literal)]);
        for id in &trig.require {
            w.empty("require", &[("idref", id)]);
        }
        w.close("trigger");
    }
    write_extensions(&mut w, &profile.extensions);
    w.close("profile");
    w.finish()
}

fn uses_extensions(profile: &PatientProfile) -> bool {
    !profile.extensions.is_empty()
        || profile
            .medcomps
            .iter()
            .any(|mc| !mc.extensions.is_empty() || mc.values.iter().any(|v| !v.extensions.is_empty()))
}

fn write_extensions(w: &mut XmlWriter, extensions: &[ExtElement]) {
    for ext in extensions {
        write_ext(w, ext);
    }
}

fn ext_start_tag(ext: &ExtElement) -> String {
    let mut tag = format!("<{EXT_PREFIX}:{}", ext.name);
    for (k, v) in &ext.attributes {
        tag.push_str(&format!(" {k}=\"{}\"", escape_attr(v)));
    }
    tag
}

fn write_ext(w: &mut XmlWriter, ext: &ExtElement) {
    let has_text = ext.children.iter().any(|c| matches!(c, ExtNode::Text(_)));
    if ext.children.is_empty() || has_text {
        w.raw_line(&ext_inline(ext));
        return;
    }
    w.raw_line(&format!("{}>", ext_start_tag(ext)));
    // child elements are indented one level deeper than the raw start tag
    let mut inner = XmlWriter::nested();
    for child in &ext.children {
        if let ExtNode::Element(e) = child {
            write_ext(&mut inner, e);
        }
    }
    for line in inner.finish_fragment().lines() {
        w.raw_line(&format!("  {line}"));
    }
    w.raw_line(&format!("</{EXT_PREFIX}:{}>", ext.name));
}

/// Mixed or text-only content is written without added whitespace.
fn ext_inline(ext: &ExtElement) -> String {
    let mut out = ext_start_tag(ext);
    if ext.children.is_empty() {
        out.push_str("/>");
        return out;
    }
    out.push('>');
    for child in &ext.children {
        match child {
            ExtNode::Text(t) => out.push_str(&escape_text(t)),
            ExtNode::Element(e) => out.push_str(&ext_inline(e)),
        }
    }
    out.push_str(&format!("</{EXT_PREFIX}:{}>", ext.name));
    out
}
