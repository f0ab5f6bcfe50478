use std::collections::BTreeMap;
use std::path::Path;

use medforge_core::template::{
    escape_slot_value, instantiate, load_template, TemplateError, TemplateSet, HELP_FRAME, TEMPLATE_SUFFIX,
};
use proptest::prelude::*;

fn ctx(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn title_slot_is_found() {
    let t = load_template("t", r#"<property name="title">{{key}} Help</property>"#).unwrap();
    assert_eq!(t.slots().iter().collect::<Vec<_>>(), ["key"]);
}

#[test]
fn slotless_template_is_identity() {
    let text = "<part class=\"JButton\" name=\"Close\"/>\n";
    let t = load_template("t", text).unwrap();
    assert!(t.slots().is_empty());
    assert_eq!(instantiate(&t, &ctx(&[("key", "BP")])).unwrap(), text);
}

#[test]
fn malformed_markers_are_rejected() {
    for (text, offset) in [("before {{ after", 7), ("a }} b", 2), ("{{Key}}", 0), ("{{}}", 0), ("x {{a b}}", 2)] {
        match load_template("t", text) {
            Err(TemplateError::Syntax { offset: o, .. }) => assert_eq!(o, offset, "{text}"),
            other => panic!("{text}: expected syntax error, got {other:?}"),
        }
    }
}

#[test]
fn values_are_escaped() {
    let t = load_template("t", "<property name=\"title\">{{name}}</property>").unwrap();
    let out = t.instantiate(&ctx(&[("name", "Salt & Water")])).unwrap();
    assert_eq!(out, "<property name=\"title\">Salt &amp; Water</property>");
    assert_eq!(escape_slot_value(r#"<a b="{{c}}">"#), "&lt;a b=&quot;&#123;&#123;c&#125;&#125;&quot;&gt;");
}

#[test]
fn missing_slot_is_an_error() {
    let t = load_template("t", "{{key}} {{name}}").unwrap();
    assert_eq!(
        t.instantiate(&ctx(&[("key", "BP")])),
        Err(TemplateError::MissingSlot { template: "t".into(), key: "name".into() })
    );
}

#[test]
fn shipped_help_frame_reproduces_the_reference_layout() {
    let set = TemplateSet::builtin();
    let help = set.get(HELP_FRAME).unwrap();
    let out = help.instantiate(&ctx(&[("key", "BP"), ("help_text", "...")])).unwrap();
    for needle in [
        r#"<part class="JFrame" name="BPHelpFrame">"#,
        r#"<property name="size">280,300</property>"#,
        r#"<property name="title">BP Help</property>"#,
        r#"<part class="JPanel" name="BPHelpMainPanel">"#,
        r#"<part class="JTextArea" name="BPHelpTextArea">"#,
        r#"<part class="JButton" name="BPHelpCloseButton">"#,
        r#"<event class="actionPerformed" part-name="BPHelpCloseButton"/>"#,
        r#"<property name="visible" part-name="BPHelpFrame">false</property>"#,
    ] {
        assert!(out.contains(needle), "missing {needle}");
    }
}

#[test]
fn template_directory_matches_builtin() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../templates");
    let loaded = TemplateSet::load_dir(&dir).unwrap();
    let builtin = TemplateSet::builtin();
    for name in medforge_core::template::REQUIRED_TEMPLATES {
        assert_eq!(loaded.get(name).unwrap().raw_text(), builtin.get(name).unwrap().raw_text());
    }
}

#[test]
fn incomplete_template_directory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(format!("help-frame{TEMPLATE_SUFFIX}")), "<template/>").unwrap();
    assert!(matches!(TemplateSet::load_dir(dir.path()), Err(TemplateError::MissingTemplate(_))));
}

fn template_piece() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z <>=\"/]{0,12}",
        Just("{{key}}".to_string()),
        Just("{{name}}".to_string()),
        Just("{{help_text}}".to_string()),
        Just(" { ".to_string()),
        Just(" } ".to_string()),
    ]
}

fn adversarial_value() -> impl Strategy<Value = String> {
    prop_oneof![
        ".{0,20}",
        Just("{{".to_string()),
        Just("}}".to_string()),
        Just("{{key}}".to_string()),
        Just("{".to_string()),
        Just("}".to_string()),
        Just("& < > \" '".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn instantiation_leaves_no_markers(
        pieces in proptest::collection::vec(template_piece(), 0..12),
        key in adversarial_value(),
        name in adversarial_value(),
        help in adversarial_value(),
    ) {
        let text = pieces.concat();
        let t = load_template("t", &text).unwrap();
        let values = ctx(&[("key", &key), ("name", &name), ("help_text", &help), ("extra", "{{")]);
        let out = t.instantiate(&values).unwrap();
        let rescanned = load_template("t", &out).unwrap();
        prop_assert!(rescanned.slots().is_empty());

        // literal text survives byte for byte around the substitutions
        let mut expected = String::new();
        for piece in &pieces {
            match piece.as_str() {
                "{{key}}" => expected.push_str(&escape_slot_value(&key)),
                "{{name}}" => expected.push_str(&escape_slot_value(&name)),
                "{{help_text}}" => expected.push_str(&escape_slot_value(&help)),
                other => expected.push_str(other),
            }
        }
        prop_assert_eq!(out, expected);
    }
}
