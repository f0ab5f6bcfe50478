//! HTTP gateway and command-line front end for the medforge pipeline.

pub mod api;
pub mod auth;
pub mod cli;
pub mod webhook;

use std::fmt;
use std::str::FromStr;

use medforge_core::ui::{CompileError, InvalidDocument, LoweringError};
use medforge_core::{compile_profile, lower_to_widget_tree, serialize_ui, PatientProfile, TemplateSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum UiFormat {
    #[default]
    Uiml,
    WidgetJson,
}

impl UiFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            UiFormat::Uiml => "uiml",
            UiFormat::WidgetJson => "widget-json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            UiFormat::Uiml => "application/xml",
            UiFormat::WidgetJson => "application/json",
        }
    }
}

impl FromStr for UiFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<UiFormat, String> {
        match s {
            "uiml" => Ok(UiFormat::Uiml),
            "widget-json" => Ok(UiFormat::WidgetJson),
            other => Err(format!("unknown format `{other}` (expected uiml or widget-json)")),
        }
    }
}

impl fmt::Display for UiFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Serialize(#[from] InvalidDocument),
    #[error(transparent)]
    Lower(#[from] LoweringError),
}

/// Compiles a profile and renders it in the requested wire format.
pub fn render_ui(profile: &PatientProfile, templates: &TemplateSet, format: UiFormat) -> Result<String, RenderError> {
    let doc = compile_profile(profile, templates)?;
    Ok(match format {
        UiFormat::Uiml => serialize_ui(&doc)?,
        UiFormat::WidgetJson => {
            let tree = lower_to_widget_tree(&doc, profile)?;
            let mut text = serde_json::to_string_pretty(&tree).expect("widget tree serializes");
            text.push('\n');
            text
        }
    })
}
