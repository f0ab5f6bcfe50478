use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Closed set of profile diagnostic codes. The string forms are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    /// Root element is not `<profile>`.
    BadRoot,
    UnknownElement,
    UnknownAttribute,
    MissingAttribute,
    MissingElement,
    DuplicateElement,
    UnexpectedText,
    BadVersion,
    BadPatientId,
    EmptyId,
    BadText,
    BadName,
    BadKey,
    DupMedcompId,
    DupValueId,
    MissingValue,
    BadDatatype,
    BadBoundType,
    DupBound,
    BadBoundLiteral,
    BoundNotComparable,
    BoundOrder,
    DanglingIdref,
    ReturnTypeMismatch,
    DupRetrieve,
    MissingRetrieve,
    BadOp,
    BadRelationTypes,
    BadTriggerLiteral,
    BadTriggerOp,
    EmptyTrigger,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        use DiagnosticCode::*;
        match self {
            BadRoot => "BAD_ROOT",
            UnknownElement => "UNKNOWN_ELEMENT",
            UnknownAttribute => "UNKNOWN_ATTRIBUTE",
            MissingAttribute => "MISSING_ATTRIBUTE",
            MissingElement => "MISSING_ELEMENT",
            DuplicateElement => "DUPLICATE_ELEMENT",
            UnexpectedText => "UNEXPECTED_TEXT",
            BadVersion => "BAD_VERSION",
            BadPatientId => "BAD_PATIENT_ID",
            EmptyId => "EMPTY_ID",
            BadText => "BAD_TEXT",
            BadName => "BAD_NAME",
            BadKey => "BAD_KEY",
            DupMedcompId => "DUP_MEDCOMP_ID",
            DupValueId => "DUP_VALUE_ID",
            MissingValue => "MISSING_VALUE",
            BadDatatype => "BAD_DATATYPE",
            BadBoundType => "BAD_BOUND_TYPE",
            DupBound => "DUP_BOUND",
            BadBoundLiteral => "BAD_BOUND_LITERAL",
            BoundNotComparable => "BOUND_NOT_COMPARABLE",
            BoundOrder => "BOUND_ORDER",
            DanglingIdref => "DANGLING_IDREF",
            ReturnTypeMismatch => "RETURN_TYPE_MISMATCH",
            DupRetrieve => "DUP_RETRIEVE",
            MissingRetrieve => "MISSING_RETRIEVE",
            BadOp => "BAD_OP",
            BadRelationTypes => "BAD_RELATION_TYPES",
            BadTriggerLiteral => "BAD_TRIGGER_LITERAL",
            BadTriggerOp => "BAD_TRIGGER_OP",
            EmptyTrigger => "EMPTY_TRIGGER",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            DiagnosticCode::EmptyTrigger => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DiagnosticCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileDiagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    /// Element path, e.g. `/profile/medComp[1]/value[2]`.
    pub location: String,
    pub message: String,
}

impl ProfileDiagnostic {
    pub fn new(code: DiagnosticCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        ProfileDiagnostic { severity: code.severity(), code, location: location.into(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ProfileDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} at {}: {}", self.code, self.location, self.message)
    }
}

pub fn has_errors(diagnostics: &[ProfileDiagnostic]) -> bool {
    diagnostics.iter().any(ProfileDiagnostic::is_error)
}
