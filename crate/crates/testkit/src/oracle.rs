//! Independent re-implementations used as test oracles. Nothing here calls
//! into the validation engine or the UIML parser; only the profile model
//! types are shared.

use std::collections::{BTreeMap, BTreeSet};

use medforge_core::model::PatientProfile;
use medforge_core::validation::SubmissionInput;

/// Parsed value in the oracle's own representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Int(i128),
    Dec(f64),
    Minutes(u32),
    Text(String),
    Bool(bool),
}

fn only_digits(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

fn unsigned(s: &str) -> &str {
    if s.starts_with('+') || s.starts_with('-') {
        &s[1..]
    } else {
        s
    }
}

/// Straight-line grammar check by datatype token.
pub fn parse_value(raw: &str, datatype: &str) -> Option<Val> {
    let s = raw.trim();
    match datatype {
        "integer" => {
            if !only_digits(unsigned(s)) {
                return None;
            }
            let v: i128 = s.parse().ok()?;
            (i128::from(i64::MIN)..=i128::from(i64::MAX)).contains(&v).then_some(Val::Int(v))
        }
        "decimal" => {
            let body = unsigned(s);
            let mut pieces = body.split('.');
            let whole = pieces.next().unwrap_or("");
            let frac = pieces.next();
            if pieces.next().is_some() || !only_digits(whole) || frac.is_some_and(|f| !only_digits(f)) {
                return None;
            }
            let v: f64 = s.parse().ok()?;
            v.is_finite().then_some(Val::Dec(v))
        }
        "time" => {
            let (h, m) = s.split_once(':')?;
            if h.len() != 2 || m.len() != 2 || !only_digits(h) || !only_digits(m) {
                return None;
            }
            let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
            (h < 24 && m < 60).then_some(Val::Minutes(h * 60 + m))
        }
        "boolean" => match s {
            "true" => Some(Val::Bool(true)),
            "false" => Some(Val::Bool(false)),
            _ => None,
        },
        "char" => Some(Val::Text(s.to_string())),
        other => panic!("oracle does not know datatype {other}"),
    }
}

fn as_number(v: &Val) -> Option<f64> {
    match v {
        Val::Int(i) => Some(*i as f64),
        Val::Dec(d) => Some(*d),
        Val::Minutes(m) => Some(f64::from(*m)),
        _ => None,
    }
}

/// Brute comparison by operator token. Ordering ops are only defined for
/// numbers and times; equality works for every kind.
pub fn compare(op: &str, a: &Val, b: &Val) -> bool {
    let ordering = match (a, b) {
        (Val::Int(x), Val::Int(y)) => x.partial_cmp(y),
        (Val::Dec(x), Val::Dec(y)) => x.partial_cmp(y),
        (Val::Minutes(x), Val::Minutes(y)) => x.partial_cmp(y),
        _ => None,
    };
    match op {
        "eq" => a == b,
        "ne" => a != b,
        "lt" => ordering == Some(std::cmp::Ordering::Less),
        "le" => matches!(ordering, Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)),
        "gt" => ordering == Some(std::cmp::Ordering::Greater),
        "ge" => matches!(ordering, Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)),
        other => panic!("oracle does not know op {other}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub accepted: bool,
    /// (code, value ids), sorted.
    pub rejections: Vec<(String, Vec<String>)>,
    /// (value id, "min" | "max", excess), sorted by id then kind.
    pub findings: Vec<(String, String, f64)>,
}

/// The submission pipeline written out step by step with no shared code.
pub fn naive_validate(profile: &PatientProfile, input: &SubmissionInput) -> Verdict {
    let mut declared: BTreeMap<String, &'static str> = BTreeMap::new();
    for mc in &profile.medcomps {
        for v in &mc.values {
            declared.insert(v.id.clone(), v.datatype.as_str());
        }
    }

    let mut rejections = Vec::new();
    for id in input.raw_values.keys() {
        if !declared.contains_key(id) {
            rejections.push(("UNKNOWN_VALUE".to_string(), vec![id.clone()]));
        }
    }

    let mut present = BTreeSet::new();
    let mut parsed: BTreeMap<String, Val> = BTreeMap::new();
    for (id, dt) in &declared {
        let Some(raw) = input.raw_values.get(id) else { continue };
        if raw.trim().is_empty() {
            continue;
        }
        present.insert(id.clone());
        match parse_value(raw, dt) {
            Some(v) => {
                parsed.insert(id.clone(), v);
            }
            None => rejections.push(("TYPE_ERROR".to_string(), vec![id.clone()])),
        }
    }

    let mut gated = BTreeSet::new();
    let mut fired = BTreeSet::new();
    for t in &profile.triggers {
        gated.extend(t.require.iter().cloned());
        let cond = &t.condition;
        let Some(observed) = parsed.get(&cond.value_id) else { continue };
        let Some(constant) = parse_value(&cond.literal, declared[&cond.value_id]) else { continue };
        if compare(cond.op.as_str(), observed, &constant) {
            fired.extend(t.require.iter().cloned());
        }
    }
    for id in declared.keys() {
        let required = !gated.contains(id) || fired.contains(id);
        if required && !present.contains(id) {
            rejections.push(("MISSING_REQUIRED".to_string(), vec![id.clone()]));
        }
    }

    for rel in &profile.relations {
        if let (Some(l), Some(r)) = (parsed.get(&rel.left), parsed.get(&rel.right)) {
            if !compare(rel.op.as_str(), l, r) {
                rejections.push(("RELATION_VIOLATION".to_string(), vec![rel.left.clone(), rel.right.clone()]));
            }
        }
    }

    let mut findings = Vec::new();
    if rejections.is_empty() {
        for mc in &profile.medcomps {
            for v in &mc.values {
                let Some(observed) = parsed.get(&v.id).and_then(as_number) else { continue };
                let dt = v.datatype.as_str();
                let limit = |b: &Option<medforge_core::Scalar>| {
                    b.as_ref().and_then(|s| parse_value(&s.to_string(), dt)).and_then(|x| as_number(&x))
                };
                if let Some(min) = limit(&v.bounds.min) {
                    if observed < min {
                        findings.push((v.id.clone(), "min".to_string(), min - observed));
                    }
                }
                if let Some(max) = limit(&v.bounds.max) {
                    if observed > max {
                        findings.push((v.id.clone(), "max".to_string(), observed - max));
                    }
                }
            }
        }
    }
    rejections.sort();
    findings.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    Verdict { accepted: rejections.is_empty(), rejections, findings }
}

/// Part counts of a serialized UIML document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartCounts {
    /// JPanels holding at least one bound input as a direct child.
    pub entity_panels: usize,
    /// JFrames named `*HelpFrame`.
    pub help_frames: usize,
    /// Parts carrying a `value-id`.
    pub inputs: usize,
    pub total: usize,
}

/// Counts parts by walking the raw XML tree.
pub fn count_parts(uiml: &str) -> PartCounts {
    let doc = roxmltree::Document::parse(uiml).expect("oracle input is well-formed XML");
    let mut counts = PartCounts::default();
    for node in doc.descendants().filter(|n| n.has_tag_name("part")) {
        counts.total += 1;
        let class = node.attribute("class").unwrap_or("");
        let name = node.attribute("name").unwrap_or("");
        if node.attribute("value-id").is_some() {
            counts.inputs += 1;
        }
        if class == "JFrame" && name.ends_with("HelpFrame") {
            counts.help_frames += 1;
        }
        let has_input_child = node.children().any(|c| c.has_tag_name("part") && c.attribute("value-id").is_some());
        if class == "JPanel" && has_input_child {
            counts.entity_panels += 1;
        }
    }
    counts
}

/// `part-name` references that name no part of the document.
pub fn dangling_part_refs(uiml: &str) -> Vec<String> {
    let doc = roxmltree::Document::parse(uiml).expect("oracle input is well-formed XML");
    let names: BTreeSet<&str> =
        doc.descendants().filter(|n| n.has_tag_name("part")).filter_map(|n| n.attribute("name")).collect();
    doc.descendants()
        .filter_map(|n| n.attribute("part-name"))
        .filter(|r| !names.contains(r))
        .map(str::to_string)
        .collect()
}
