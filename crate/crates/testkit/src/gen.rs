//! Seeded generators of valid profiles and of submissions against them.

use std::collections::BTreeMap;

use medforge_core::model::{
    Descrip, ExtElement, ExtNode, MedComp, MethodParam, PatientProfile, RelationConstraint, RetrieveBinding,
    TriggerCondition, TriggerRule, ValueSpec,
};
use medforge_core::scalar::{CompareOp, Datatype, Scalar, TimeOfDay};
use medforge_core::validation::{Period, SubmissionInput};
use rand::seq::IndexedRandom;
use rand::{Rng, RngExt};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_medcomps: usize,
    pub max_values: usize,
    pub max_relations: usize,
    pub max_triggers: usize,
    /// Mix XML-significant characters, slot markers and non-ASCII text into
    /// free-text fields.
    pub adversarial_text: bool,
    pub extensions: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_medcomps: 4,
            max_values: 4,
            max_relations: 3,
            max_triggers: 2,
            adversarial_text: true,
            extensions: true,
        }
    }
}

const WORDS: &[&str] = &[
    "Blood",
    "Pressure",
    "Body",
    "Temperature",
    "Weight",
    "Heart",
    "Rate",
    "Glucose",
    "Oxygen",
    "Dialysate",
    "Volume",
    "Salt&Water",
    "Ultra-filtration",
    "Été",
    "Pulse",
    "Fluid",
];

const TEXTS: &[&str] = &[
    "systolic",
    "diastolic",
    "time of measure",
    "sitting",
    "lying down",
    "Salt & Water",
    "a < b > c",
    "quote \" and 'apostrophe'",
    "{{key}} stays literal",
    "closing }} brace",
    "line one\nline two",
    "carriage\r\nreturn",
    "tab\tseparated",
    "température élevée",
    "血压",
];

const PLAIN_TEXTS: &[&str] = &["systolic", "diastolic", "time", "sitting", "morning reading", "fasting"];

fn text<R: Rng>(rng: &mut R, cfg: &GenConfig) -> String {
    let pool = if cfg.adversarial_text { TEXTS } else { PLAIN_TEXTS };
    pool.choose(rng).unwrap().to_string()
}

fn datatype<R: Rng>(rng: &mut R) -> Datatype {
    *[Datatype::Integer, Datatype::Integer, Datatype::Decimal, Datatype::Time, Datatype::Char, Datatype::Boolean]
        .choose(rng)
        .unwrap()
}

/// A random value of `datatype` drawn from a small range so that bounds,
/// relations and trigger conditions hit both outcomes often.
pub fn random_scalar<R: Rng>(rng: &mut R, datatype: Datatype) -> Scalar {
    match datatype {
        Datatype::Integer => Scalar::Integer(rng.random_range(-30..=30)),
        Datatype::Decimal => Scalar::Decimal(f64::from(rng.random_range(-3000..=3000)) / 100.0),
        Datatype::Time => {
            Scalar::Time(TimeOfDay::new(rng.random_range(0..24), rng.random_range(0..60)).expect("in range"))
        }
        Datatype::Boolean => Scalar::Boolean(rng.random_bool(0.5)),
        Datatype::Char => Scalar::Text(["low", "high", "none", "n/a"].choose(rng).unwrap().to_string()),
    }
}

fn ordered_pair<R: Rng>(rng: &mut R, datatype: Datatype) -> (Scalar, Scalar) {
    let a = random_scalar(rng, datatype);
    let b = random_scalar(rng, datatype);
    if a.order(&b) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    }
}

fn extension<R: Rng>(rng: &mut R) -> ExtElement {
    let mut e = ExtElement {
        name: "note".into(),
        attributes: vec![("by".into(), "dr & co".into())],
        children: vec![ExtNode::Text("keep < me".into())],
    };
    if rng.random_bool(0.5) {
        e.children = vec![ExtNode::Element(ExtElement {
            name: "audit".into(),
            attributes: vec![("at".into(), "2026-10-16".into()), ("id".into(), "7".into())],
            children: vec![],
        })];
    }
    e
}

fn value_spec<R: Rng>(rng: &mut R, cfg: &GenConfig, id: String) -> ValueSpec {
    let dt = datatype(rng);
    let mut v = ValueSpec::new(id, dt);
    for _ in 0..rng.random_range(0..=2) {
        v.descrips.push(Descrip { type_tag: "medical".into(), class_tag: "clinical".into(), text: text(rng, cfg) });
    }
    if dt.is_ordered() {
        let (lo, hi) = ordered_pair(rng, dt);
        match rng.random_range(0..4) {
            0 => v.bounds.min = Some(lo),
            1 => v.bounds.max = Some(hi),
            2 => {
                v.bounds.min = Some(lo);
                v.bounds.max = Some(hi);
            }
            _ => {}
        }
    }
    if cfg.extensions && rng.random_bool(0.1) {
        v.extensions.push(extension(rng));
    }
    v
}

fn retrieve<R: Rng>(rng: &mut R, v: &ValueSpec) -> RetrieveBinding {
    let params = (0..rng.random_range(0..=3))
        .map(|i| MethodParam {
            datatype: datatype(rng),
            name: format!("{}{i}", ["BP", "Arg", "Sys"].choose(rng).unwrap()),
        })
        .collect();
    RetrieveBinding {
        idref: v.id.clone(),
        type_tag: ["bsnQuery", "deviceRead"].choose(rng).unwrap().to_string(),
        method_name: ["bsnQuery", "readSensor"].choose(rng).unwrap().to_string(),
        params,
        return_datatype: v.datatype,
    }
}

/// A random profile that passes `validate_profile`.
pub fn random_profile<R: Rng>(rng: &mut R, cfg: &GenConfig) -> PatientProfile {
    let mut p = PatientProfile::new(format!("p{}", rng.random_range(1..1000)));
    let n = rng.random_range(0..=cfg.max_medcomps);
    for i in 0..n {
        let id = format!("{:012}{i:02}", rng.random_range(0..1_000_000_000u64));
        let words: Vec<&str> = (0..rng.random_range(1..=3)).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let mut mc = MedComp::new(id.clone(), words.join(" "));
        if rng.random_bool(0.7) {
            mc.state = Some(text(rng, cfg));
        }
        if rng.random_bool(0.2) {
            mc.key = Some(["BP", "Temp", "W", "Bp2"].choose(rng).unwrap().to_string());
        }
        if rng.random_bool(0.3) {
            mc.help_text = Some(text(rng, cfg));
        }
        for j in 0..rng.random_range(1..=cfg.max_values) {
            let suffix = ["sys", "dia", "time", "val", "x-y", "a.b"].choose(rng).unwrap();
            let v = value_spec(rng, cfg, format!("{id}{suffix}{j}"));
            mc.retrieves.push(retrieve(rng, &v));
            mc.values.push(v);
        }
        if rng.random_bool(0.5) {
            mc.retrieves.reverse();
        }
        if cfg.extensions && rng.random_bool(0.1) {
            mc.extensions.push(extension(rng));
        }
        p.medcomps.push(mc);
    }

    let values: Vec<(String, Datatype)> = p.values().map(|(_, v)| (v.id.clone(), v.datatype)).collect();
    let ordered: Vec<&(String, Datatype)> = values.iter().filter(|(_, d)| d.is_ordered()).collect();
    for _ in 0..rng.random_range(0..=cfg.max_relations) {
        let Some(left) = ordered.choose(rng) else { break };
        let same: Vec<&&(String, Datatype)> = ordered.iter().filter(|(_, d)| *d == left.1).collect();
        let right = same.choose(rng).unwrap();
        p.relations.push(RelationConstraint {
            op: *CompareOp::ALL.choose(rng).unwrap(),
            left: left.0.clone(),
            right: right.0.clone(),
        });
    }
    if values.len() >= 2 {
        for _ in 0..rng.random_range(0..=cfg.max_triggers) {
            let (cond_id, cond_dt) = values.choose(rng).unwrap().clone();
            let ops: &[CompareOp] =
                if cond_dt.is_ordered() { &CompareOp::ALL } else { &[CompareOp::Eq, CompareOp::Ne] };
            let others: Vec<&String> = values.iter().map(|(id, _)| id).filter(|id| **id != cond_id).collect();
            let mut require: Vec<String> =
                (0..rng.random_range(1..=2)).map(|_| (*others.choose(rng).unwrap()).clone()).collect();
            require.dedup();
            p.triggers.push(TriggerRule {
                condition: TriggerCondition {
                    value_id: cond_id,
                    op: *ops.choose(rng).unwrap(),
                    literal: random_scalar(rng, cond_dt).to_string(),
                },
                require,
            });
        }
    }
    if cfg.extensions && rng.random_bool(0.1) {
        p.extensions.push(extension(rng));
    }
    p
}

fn garbage<R: Rng>(rng: &mut R, datatype: Datatype) -> Option<&'static str> {
    let pool: &[&str] = match datatype {
        Datatype::Integer => &["abc", "1.5", "1e3", "+", "--1", "12 3", "٣", "0x10", "99999999999999999999"],
        Datatype::Decimal => &[".5", "5.", "1e3", "NaN", "inf", "1,5", "-", "1..2"],
        Datatype::Time => &["24:00", "7:05", "07:60", "0705", "07:05:00", "ab:cd", "-1:00"],
        Datatype::Boolean => &["True", "yes", "1", "FALSE"],
        Datatype::Char => return None,
    };
    pool.choose(rng).copied()
}

/// A submission mixing valid, out-of-range, malformed, blank, missing and
/// unknown entries.
pub fn random_submission<R: Rng>(rng: &mut R, profile: &PatientProfile) -> SubmissionInput {
    let mut raw_values = BTreeMap::new();
    for (_, v) in profile.values() {
        let raw = match rng.random_range(0..20) {
            0 => None,
            1 => Some(String::new()),
            2 => Some("   ".to_string()),
            3 | 4 => garbage(rng, v.datatype).map(str::to_string),
            5 => Some(format!("  {} ", random_scalar(rng, v.datatype))),
            _ => Some(random_scalar(rng, v.datatype).to_string()),
        };
        if let Some(raw) = raw {
            raw_values.insert(v.id.clone(), raw);
        }
    }
    if rng.random_bool(0.05) {
        raw_values.insert("not-a-value".into(), "1".into());
    }
    SubmissionInput {
        patient_id: profile.patient_id.clone(),
        period: *[Period::Morning, Period::Noon, Period::Evening, Period::Night].choose(rng).unwrap(),
        client_timestamp: "2026-10-16T08:00:00Z".into(),
        raw_values,
        submission_nonce: None,
        profile_version: None,
    }
}

/// A submission that satisfies types, requiredness and relations whenever
/// one exists among a few random tries; returns `None` otherwise.
pub fn accepted_submission<R: Rng>(rng: &mut R, profile: &PatientProfile) -> Option<SubmissionInput> {
    for _ in 0..200 {
        let mut input = random_submission(rng, profile);
        input.raw_values =
            profile.values().map(|(_, v)| (v.id.clone(), random_scalar(rng, v.datatype).to_string())).collect();
        if medforge_core::validate_submission(profile, &input).is_accepted() {
            return Some(input);
        }
    }
    None
}
