//! Profile XML format: parsing, schema validation and canonical serialization.

mod diagnostic;
mod parse;
mod serialize;
mod validate;

use thiserror::Error;

pub use diagnostic::{has_errors, DiagnosticCode, ProfileDiagnostic, Severity};
pub use serialize::serialize_profile;
pub use validate::{is_valid_patient_id, validate_profile};

pub(crate) use parse::parse_xml;

use crate::model::PatientProfile;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed XML at {line}:{column}: {message}")]
pub struct XmlError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// Carries the diagnostics of a profile that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("profile is invalid: {}", summarize(.diagnostics))]
pub struct ValidationError {
    pub diagnostics: Vec<ProfileDiagnostic>,
}

fn summarize(diagnostics: &[ProfileDiagnostic]) -> String {
    let errors: Vec<String> =
        diagnostics.iter().filter(|d| d.is_error()).map(|d| format!("{} at {}", d.code, d.location)).collect();
    errors.join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl ProfileError {
    pub fn diagnostics(&self) -> &[ProfileDiagnostic] {
        match self {
            ProfileError::Xml(_) => &[],
            ProfileError::Invalid(v) => &v.diagnostics,
        }
    }
}

/// A parsed document together with every diagnostic found in it.
#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub profile: PatientProfile,
    pub diagnostics: Vec<ProfileDiagnostic>,
}

/// Parses and checks a profile document without failing on schema errors.
///
/// Semantic validation only runs when the structural pass found no errors,
/// since a partially read model would produce misleading diagnostics.
pub fn read_profile(xml: &str) -> Result<ProfileReport, XmlError> {
    let (profile, mut diagnostics) = parse::read_structure(xml)?;
    if !has_errors(&diagnostics) {
        diagnostics.extend(validate_profile(&profile));
    }
    Ok(ProfileReport { profile, diagnostics })
}

/// Parses a profile document; any error-severity diagnostic fails the parse.
pub fn parse_profile(xml: &str) -> Result<PatientProfile, ProfileError> {
    let report = read_profile(xml)?;
    if has_errors(&report.diagnostics) {
        return Err(ValidationError { diagnostics: report.diagnostics }.into());
    }
    Ok(report.profile)
}

/// Like [`parse_profile`] for raw bytes, which must be UTF-8.
pub fn parse_profile_bytes(bytes: &[u8]) -> Result<PatientProfile, ProfileError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let before = &bytes[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
        let column = (before.len() - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1)) as u32 + 1;
        XmlError { line, column, message: "input is not valid UTF-8".to_string() }
    })?;
    parse_profile(text)
}
