#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Compares `actual` with a committed golden file. With `UPDATE_GOLDEN=1`
/// the golden is rewritten instead.
pub fn assert_golden(name: &str, actual: &str) {
    let path = fixture_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1") {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("golden {name} missing ({e}); run with UPDATE_GOLDEN=1 and review"));
    assert!(expected == actual, "output differs from golden {name}:\n{actual}");
}

pub fn bp_profile() -> medforge_core::PatientProfile {
    medforge_core::parse_profile(&fixture("blood-pressure.xml")).expect("blood-pressure fixture parses")
}
