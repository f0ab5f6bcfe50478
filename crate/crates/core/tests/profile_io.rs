mod common;

use common::{bp_profile, fixture};
use medforge_core::model::{MedComp, RelationConstraint, RetrieveBinding, TriggerCondition, TriggerRule, ValueSpec};
use medforge_core::profile_io::{parse_profile_bytes, read_profile, DiagnosticCode};
use medforge_core::scalar::{CompareOp, Datatype, Scalar};
use medforge_core::{parse_profile, serialize_profile, validate_profile, PatientProfile};
use medforge_testkit::gen::{random_profile, GenConfig};
use proptest::prelude::*;

#[test]
fn bp_fields() {
    let p = bp_profile();
    assert_eq!(p.medcomps.len(), 1);
    let mc = &p.medcomps[0];
    assert_eq!(mc.id, "00215062000112");
    assert_eq!(mc.name, "Blood Pressure");
    assert_eq!(mc.state.as_deref(), Some("sitting"));
    assert_eq!(mc.values.len(), 3);

    let sys = p.value("00215062000112sys").unwrap();
    assert_eq!(sys.datatype, Datatype::Integer);
    assert_eq!(sys.bounds.max, Some(Scalar::Integer(23)));
    assert_eq!(sys.bounds.min, None);
    assert_eq!(sys.descrips[0].type_tag, "medical");
    assert_eq!(sys.descrips[0].class_tag, "clinical");
    assert_eq!(sys.descrips[0].text, "systolic");

    let binding = mc.retrieves.iter().find(|r| r.idref == "00215062000112sys").unwrap();
    assert_eq!(binding.type_tag, "bsnQuery");
    assert_eq!(binding.method_name, "bsnQuery");
    let params: Vec<(Datatype, &str)> = binding.params.iter().map(|p| (p.datatype, p.name.as_str())).collect();
    assert_eq!(params, [(Datatype::Char, "BP"), (Datatype::Char, "Systolic")]);
    assert_eq!(binding.return_datatype, Datatype::Integer);
}

#[test]
fn bp_is_valid() {
    assert_eq!(validate_profile(&bp_profile()), []);
}

#[test]
fn bp_round_trips() {
    let p = bp_profile();
    let xml = serialize_profile(&p).unwrap();
    assert_eq!(parse_profile(&xml).unwrap(), p);
    assert_eq!(serialize_profile(&parse_profile(&xml).unwrap()).unwrap(), xml);
}

#[test]
fn canonical_form_is_lf_two_space_utf8() {
    let xml = serialize_profile(&bp_profile()).unwrap();
    assert!(xml
        .starts_with("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<profile patient=\"p1\" version=\"0\">\n  <medComp"));
    assert!(!xml.contains('\r'));
    assert!(!xml.contains('\t'));
    assert!(xml.ends_with("</profile>\n"));
}

#[test]
fn empty_profile() {
    let p = parse_profile(r#"<profile patient="p1"/>"#).unwrap();
    assert!(p.medcomps.is_empty());
    assert_eq!(
        serialize_profile(&p).unwrap(),
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<profile patient=\"p1\" version=\"0\"/>\n"
    );
}

#[test]
fn doctype_is_not_resolved() {
    let xml = r#"<?xml version="1.0"?>
<!DOCTYPE profile SYSTEM "http://example.invalid/profile.dtd">
<profile patient="p1"/>"#;
    assert!(parse_profile(xml).unwrap().medcomps.is_empty());
}

fn first_codes(xml: &str) -> Vec<DiagnosticCode> {
    read_profile(xml).unwrap().diagnostics.iter().map(|d| d.code).collect()
}

#[test]
fn fixture_mutations_are_diagnosed() {
    let base = fixture("blood-pressure.xml");
    let dangling = base.replace(r#"left="00215062000112dia""#, r#"left="ghost""#);
    assert_eq!(first_codes(&dangling), [DiagnosticCode::DanglingIdref]);
    let bad_type = base.replace(r#"datatype="integer">"#, r#"datatype="float">"#);
    assert!(first_codes(&bad_type).contains(&DiagnosticCode::BadDatatype));
    let bad_return = base.replacen(r#"<return datatype="time"/>"#, r#"<return datatype="char"/>"#, 1);
    assert_eq!(first_codes(&bad_return), [DiagnosticCode::ReturnTypeMismatch]);
    let extra = base.replace("<state>sitting</state>", "<state>sitting</state><colour>red</colour>");
    assert_eq!(first_codes(&extra), [DiagnosticCode::UnknownElement]);
}

fn value_with_binding(mc: &mut MedComp, id: &str, dt: Datatype) {
    mc.values.push(ValueSpec::new(id, dt));
    mc.retrieves.push(RetrieveBinding {
        idref: id.into(),
        type_tag: "q".into(),
        method_name: "q".into(),
        params: vec![],
        return_datatype: dt,
    });
}

/// Defects that each touch a distinct element of the base profile, paired
/// with the code they must produce.
type Defect = (DiagnosticCode, fn(&mut PatientProfile));

fn defects() -> Vec<Defect> {
    vec![
        (DiagnosticCode::BadPatientId, |p| p.patient_id = "bad id!".into()),
        (DiagnosticCode::DupValueId, |p| {
            let dup = p.medcomps[0].values[0].id.clone();
            value_with_binding(&mut p.medcomps[1], &dup, Datatype::Time);
        }),
        (DiagnosticCode::BoundOrder, |p| {
            let v = &mut p.medcomps[0].values[1];
            v.bounds.min = Some(Scalar::Integer(10));
            v.bounds.max = Some(Scalar::Integer(5));
        }),
        (DiagnosticCode::DanglingIdref, |p| {
            p.relations.push(RelationConstraint { op: CompareOp::Lt, left: "ghost".into(), right: "ghost2".into() })
        }),
        (DiagnosticCode::BadRelationTypes, |p| {
            let time = p.medcomps[0].values[0].id.clone();
            let dia = p.medcomps[0].values[2].id.clone();
            p.relations.push(RelationConstraint { op: CompareOp::Lt, left: time, right: dia });
        }),
        (DiagnosticCode::MissingRetrieve, |p| {
            let dia = p.medcomps[0].values[2].id.clone();
            p.medcomps[0].retrieves.retain(|r| r.idref != dia);
        }),
        (DiagnosticCode::ReturnTypeMismatch, |p| {
            let time = p.medcomps[0].values[0].id.clone();
            for r in &mut p.medcomps[0].retrieves {
                if r.idref == time {
                    r.return_datatype = Datatype::Boolean;
                }
            }
        }),
        (DiagnosticCode::BadTriggerLiteral, |p| {
            let sys = p.medcomps[0].values[1].id.clone();
            let w = p.medcomps[1].values[0].id.clone();
            p.triggers.push(TriggerRule {
                condition: TriggerCondition { value_id: sys, op: CompareOp::Gt, literal: "abc".into() },
                require: vec![w],
            });
        }),
        (DiagnosticCode::BadTriggerOp, |p| {
            let flag = p.medcomps[1].values[1].id.clone();
            let w = p.medcomps[1].values[0].id.clone();
            p.triggers.push(TriggerRule {
                condition: TriggerCondition { value_id: flag, op: CompareOp::Lt, literal: "true".into() },
                require: vec![w],
            });
        }),
        (DiagnosticCode::EmptyId, |p| {
            let mut mc = MedComp::new("", "Extra");
            value_with_binding(&mut mc, "extra1", Datatype::Integer);
            p.medcomps.push(mc);
        }),
        (DiagnosticCode::MissingValue, |p| p.medcomps.push(MedComp::new("novalues", "Empty"))),
        (DiagnosticCode::BadKey, |p| p.medcomps[1].key = Some("1x".into())),
        (DiagnosticCode::BoundNotComparable, |p| p.medcomps[1].values[1].bounds.max = Some(Scalar::Boolean(true))),
    ]
}

fn defect_base() -> PatientProfile {
    let mut p = bp_profile();
    let mut weight = MedComp::new("w1", "Weight");
    value_with_binding(&mut weight, "w1kg", Datatype::Decimal);
    value_with_binding(&mut weight, "w1flag", Datatype::Boolean);
    p.medcomps.push(weight);
    p
}

#[test]
fn defect_base_is_valid() {
    assert_eq!(validate_profile(&defect_base()), []);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn round_trip_fixpoint(seed in any::<u64>()) {
        let p = random_profile(&mut medforge_testkit::rng(seed), &GenConfig::default());
        prop_assert_eq!(validate_profile(&p), vec![]);
        let xml = serialize_profile(&p).unwrap();
        let back = parse_profile(&xml).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(serialize_profile(&back).unwrap(), xml);
    }

    #[test]
    fn seeded_defects_are_all_reported(mask in 1u32..(1 << 13)) {
        let mut p = defect_base();
        let mut expected = Vec::new();
        for (i, (code, inject)) in defects().into_iter().enumerate() {
            if mask & (1 << i) != 0 {
                inject(&mut p);
                expected.push(code);
            }
        }
        let found: Vec<DiagnosticCode> = validate_profile(&p).iter().map(|d| d.code).collect();
        prop_assert!(found.len() >= expected.len());
        for code in expected {
            prop_assert!(found.contains(&code), "missing {:?} in {:?}", code, found);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_profile_bytes(&bytes);
    }

    #[test]
    fn mutated_fixture_never_panics(cut in 0usize..2000, pos in 0usize..2000, byte in any::<u8>()) {
        let mut bytes = fixture("blood-pressure.xml").into_bytes();
        if !bytes.is_empty() {
            let i = pos % bytes.len();
            bytes[i] = byte;
        }
        bytes.truncate(cut.min(bytes.len()));
        let _ = parse_profile_bytes(&bytes);
    }
}
