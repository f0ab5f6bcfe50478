//! Core of medforge: patient profiles of medical components, their XML
//! format, the template-driven UIML compiler, submission validation and the
//! append-only record store.

pub mod model;
pub mod profile_io;
pub mod scalar;
pub mod store;
pub mod template;
pub mod ui;
pub mod validation;
mod xmlw;

pub use model::{MedComp, PatientProfile, ValueSpec};
pub use profile_io::{parse_profile, serialize_profile, validate_profile};
pub use scalar::{CompareOp, Datatype, Scalar};
pub use store::Store;
pub use template::TemplateSet;
pub use ui::{compile_profile, lower_to_widget_tree, serialize_ui, UiDocument};
pub use validation::{validate_submission, SubmissionInput, ValidationOutcome};
