mod common;

use std::collections::BTreeMap;

use common::bp_profile;
use medforge_core::model::{RelationConstraint, TriggerCondition, TriggerRule, ValueSpec};
use medforge_core::scalar::{CompareOp, Datatype, Scalar};
use medforge_core::validation::{
    check_bounds, check_relations, evaluate_triggers, validate_submission, FindingKind, Period, RejectionCode, Status,
    SubmissionInput, TypedValue, ValidationOutcome,
};
use medforge_testkit::gen::{random_profile, random_scalar, random_submission, GenConfig};
use medforge_testkit::oracle::{compare, naive_validate, parse_value, Verdict};
use proptest::prelude::*;
use rand::RngExt;

const TIME: &str = "00215062000112time";
const SYS: &str = "00215062000112sys";
const DIA: &str = "00215062000112dia";

fn submit(time: &str, sys: &str, dia: &str) -> ValidationOutcome {
    let input = SubmissionInput {
        patient_id: "p1".into(),
        period: Period::Morning,
        client_timestamp: "2026-10-16T08:00:00Z".into(),
        raw_values: BTreeMap::from([(TIME.into(), time.into()), (SYS.into(), sys.into()), (DIA.into(), dia.into())]),
        submission_nonce: None,
        profile_version: None,
    };
    validate_submission(&bp_profile(), &input)
}

fn as_verdict(outcome: &ValidationOutcome) -> Verdict {
    let mut rejections: Vec<(String, Vec<String>)> =
        outcome.rejections.iter().map(|r| (r.code.as_str().to_string(), r.value_ids.clone())).collect();
    rejections.sort();
    let mut findings: Vec<(String, String, f64)> = outcome
        .findings
        .iter()
        .map(|f| {
            let kind = match f.kind {
                FindingKind::Min => "min",
                FindingKind::Max => "max",
            };
            (f.value_id.clone(), kind.to_string(), f.excess)
        })
        .collect();
    findings.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    Verdict { accepted: outcome.status == Status::Accepted, rejections, findings }
}

#[test]
fn bp_in_range_is_accepted() {
    let out = submit("08:00", "12", "8");
    assert_eq!(out.status, Status::Accepted);
    assert!(out.findings.is_empty());
}

#[test]
fn bp_bound_is_inclusive() {
    assert!(submit("08:00", "23", "8").findings.is_empty());
    let out = submit("08:00", "24", "8");
    assert!(out.is_accepted());
    assert_eq!(out.findings.len(), 1);
    assert_eq!(out.findings[0].kind, FindingKind::Max);
    assert_eq!(out.findings[0].excess, 1.0);
}

#[test]
fn bp_relation_rejects() {
    let out = submit("08:00", "12", "15");
    assert_eq!(out.status, Status::Rejected);
    assert_eq!(out.rejections[0].code, RejectionCode::RelationViolation);
    assert_eq!(out.rejections[0].value_ids, [DIA, SYS]);
    assert!(submit("08:00", "12", "12").rejections.iter().any(|r| r.code == RejectionCode::RelationViolation));
}

#[test]
fn non_numeric_integer_is_a_type_error() {
    let out = submit("08:00", "abc", "8");
    assert_eq!(out.status, Status::Rejected);
    assert_eq!(out.rejections.len(), 1);
    assert_eq!(out.rejections[0].code, RejectionCode::TypeError);
    assert_eq!(out.rejections[0].value_ids, [SYS]);
}

#[test]
fn whitespace_around_numbers_is_trimmed() {
    let out = submit(" 08:00", " 12 ", "\t8");
    assert!(out.is_accepted());
    assert_eq!(out.record.unwrap().values[SYS], Scalar::Integer(12));
}

#[test]
fn outcome_json_shape() {
    let json = serde_json::to_value(submit("08:00", "24", "8")).unwrap();
    assert_eq!(json["status"], "accepted");
    assert_eq!(json["findings"][0]["kind"], "max");
    assert_eq!(json["findings"][0]["limit"], serde_json::json!({"datatype": "integer", "value": 23}));
    assert_eq!(json["record"]["values"][SYS]["value"], 24);
    let rejected = serde_json::to_value(submit("08:00", "abc", "8")).unwrap();
    assert_eq!(rejected["rejections"][0]["code"], "TYPE_ERROR");
    assert!(rejected.get("record").is_none());
}

#[test]
fn pipeline_agrees_with_oracle() {
    let cfg = GenConfig::default();
    let mut rng = medforge_testkit::rng(0x5eed);
    let mut accepted = 0;
    let mut findings = 0;
    let mut codes = std::collections::BTreeSet::new();
    for case in 0..1000 {
        let profile = random_profile(&mut rng, &cfg);
        let input = random_submission(&mut rng, &profile);
        let outcome = validate_submission(&profile, &input);
        let expected = naive_validate(&profile, &input);
        let actual = as_verdict(&outcome);
        assert_eq!(actual.accepted, expected.accepted, "case {case}: {input:?}");
        assert_eq!(actual.rejections, expected.rejections, "case {case}");
        assert_eq!(actual.findings.len(), expected.findings.len(), "case {case}");
        for (a, e) in actual.findings.iter().zip(&expected.findings) {
            assert_eq!((&a.0, &a.1), (&e.0, &e.1), "case {case}");
            assert!((a.2 - e.2).abs() < 1e-9, "case {case}: excess {} vs {}", a.2, e.2);
        }
        codes.extend(outcome.rejections.iter().map(|r| r.code));
        findings += outcome.findings.len();
        if outcome.is_accepted() {
            accepted += 1;
            // out-of-range values are recorded exactly as parsed
            let record = outcome.record.unwrap();
            for (id, value) in &record.values {
                let dt = profile.value(id).unwrap().datatype;
                assert_eq!(Some(value.clone()), Scalar::parse(&input.raw_values[id], dt));
            }
        } else {
            assert!(outcome.record.is_none() && outcome.findings.is_empty());
        }
    }
    // the corpus has to exercise both branches to mean anything
    assert!(accepted > 50 && accepted < 950, "accepted {accepted} of 1000");
    assert!(findings > 20, "only {findings} findings");
    assert_eq!(codes.len(), 4, "codes seen: {codes:?}");
}

#[test]
fn bounds_match_brute_predicate() {
    let mut rng = medforge_testkit::rng(7);
    for _ in 0..1000 {
        let v: i64 = rng.random_range(-50..=50);
        let a: i64 = rng.random_range(-50..=50);
        let b: i64 = rng.random_range(-50..=50);
        let (min, max) = (a.min(b), a.max(b));
        let mut spec = ValueSpec::new("x", Datatype::Integer);
        spec.bounds.min = Some(Scalar::Integer(min));
        spec.bounds.max = Some(Scalar::Integer(max));
        let findings = check_bounds(&TypedValue { value_id: "x".into(), value: Scalar::Integer(v) }, &spec);
        assert_eq!(!findings.is_empty(), v < min || v > max, "v={v} min={min} max={max}");
        for f in findings {
            let expected = if f.kind == FindingKind::Min { min - v } else { v - max };
            assert_eq!(f.excess, expected as f64);
        }
    }
}

#[test]
fn unordered_values_never_have_findings() {
    for (dt, value) in [(Datatype::Char, Scalar::Text("zzz".into())), (Datatype::Boolean, Scalar::Boolean(true))] {
        let spec = ValueSpec::new("x", dt);
        assert!(check_bounds(&TypedValue { value_id: "x".into(), value }, &spec).is_empty());
    }
}

#[test]
fn relations_match_comparison_oracle_for_every_op() {
    let mut rng = medforge_testkit::rng(11);
    for op in CompareOp::ALL {
        for dt in [Datatype::Integer, Datatype::Decimal, Datatype::Time] {
            for _ in 0..300 {
                let left = random_scalar(&mut rng, dt);
                // equal operands often enough to exercise the boundary
                let right = if rng.random_bool(0.2) { left.clone() } else { random_scalar(&mut rng, dt) };
                let values = BTreeMap::from([("l".to_string(), left.clone()), ("r".to_string(), right.clone())]);
                let rel = RelationConstraint { op, left: "l".into(), right: "r".into() };
                let violated = !check_relations(&[rel], &values).is_empty();
                let holds = compare(
                    op.as_str(),
                    &parse_value(&left.to_string(), dt.as_str()).unwrap(),
                    &parse_value(&right.to_string(), dt.as_str()).unwrap(),
                );
                assert_eq!(violated, !holds, "{left} {op:?} {right}");
            }
        }
    }
}

#[test]
fn absent_trigger_condition_is_inert() {
    let trig = TriggerRule {
        condition: TriggerCondition { value_id: "sys".into(), op: CompareOp::Gt, literal: "20".into() },
        require: vec!["pulse".into()],
    };
    assert!(evaluate_triggers(&[trig], &BTreeMap::new()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adding_a_trigger_never_shrinks_the_required_set(seed in any::<u64>()) {
        let mut rng = medforge_testkit::rng(seed);
        let profile = random_profile(&mut rng, &GenConfig::default());
        let values: BTreeMap<String, Scalar> = profile
            .values()
            .map(|(_, v)| (v.id.clone(), random_scalar(&mut rng, v.datatype)))
            .collect();
        let before = evaluate_triggers(&profile.triggers, &values);
        let mut more = profile.triggers.clone();
        if let Some((id, dt)) = profile.values().map(|(_, v)| (v.id.clone(), v.datatype)).next() {
            more.push(TriggerRule {
                condition: TriggerCondition { value_id: id.clone(), op: CompareOp::Ne, literal: random_scalar(&mut rng, dt).to_string() },
                require: vec![id],
            });
        }
        let after = evaluate_triggers(&more, &values);
        prop_assert!(before.is_subset(&after));
    }
}
