use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::uiml::{parse_fragment, Fragment, UiParseError};
use super::{InvalidDocument, Part, StyleProperty, UiDocument, WidgetClass};
use crate::model::{derive_entity_key, substitution_context, KeyError, MedComp, PatientProfile};
use crate::profile_io::{has_errors, validate_profile, ValidationError};
use crate::template::{TemplateError, TemplateSet, APP_SHELL, ENTITY_SHELL, HELP_FRAME};

/// Placeholder in the app shell where entity panels go.
pub const ENTITIES_PLACEHOLDER: &str = "entities";
/// Placeholder in the entity shell where label/input rows go.
pub const INPUTS_PLACEHOLDER: &str = "inputs";

/// Upper bound on key re-derivations for one medcomp before giving up.
const MAX_KEY_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    InvalidProfile(#[from] ValidationError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("template `{template}` does not produce a valid fragment: {source}")]
    TemplateStructure {
        template: String,
        #[source]
        source: UiParseError,
    },
    #[error("template `{template}` must contain exactly one <{placeholder}/> inside a part")]
    MissingInsertionPoint { template: String, placeholder: String },
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("duplicate part name `{0}`")]
    DuplicatePart(String),
    #[error("templates assemble into an invalid document: {0}")]
    Assembly(#[from] InvalidDocument),
}

fn instantiate_fragment(
    templates: &TemplateSet,
    name: &str,
    ctx: &BTreeMap<String, String>,
    placeholder: Option<&str>,
) -> Result<Fragment, CompileError> {
    let template = templates.required(name)?;
    let text = template.instantiate(ctx)?;
    let allowed: Vec<&str> = placeholder.into_iter().collect();
    let fragment = parse_fragment(&text, &allowed)
        .map_err(|source| CompileError::TemplateStructure { template: name.to_string(), source })?;
    if let Some(p) = placeholder {
        if fragment.insertions.len() != 1 {
            return Err(CompileError::MissingInsertionPoint { template: name.to_string(), placeholder: p.to_string() });
        }
    }
    Ok(fragment)
}

/// Inserts `children` into the fragment at its single placeholder.
fn fill_insertion(fragment: &mut Fragment, children: Vec<Part>) {
    let (_, parent, index) = fragment.insertions.pop().expect("insertion point checked on instantiation");
    let target = fragment
        .parts
        .iter_mut()
        .find_map(|p| p.find_mut(&parent))
        .expect("placeholder parent is part of the fragment");
    target.children.splice(index..index, children);
}

fn fragment_names(fragment: &Fragment) -> Vec<String> {
    fragment.parts.iter().flat_map(Part::walk).map(|p| p.name.clone()).collect()
}

/// Everything generated for one medcomp before it is placed in the document.
struct EntityBuild {
    key: String,
    shell: Fragment,
    help: Fragment,
    row_styles: Vec<StyleProperty>,
}

fn build_entity(templates: &TemplateSet, mc: &MedComp, key: &str) -> Result<EntityBuild, CompileError> {
    let ctx = substitution_context(mc, key);
    let mut shell = instantiate_fragment(templates, ENTITY_SHELL, &ctx, Some(INPUTS_PLACEHOLDER))?;
    let mut rows = Vec::new();
    let mut row_styles = Vec::new();
    for v in &mc.values {
        let input_name = format!("{key}_{}", v.id);
        let label_name = format!("{key}Label_{}", v.id);
        rows.push(Part::new(WidgetClass::JLabel, &label_name));
        let mut input = Part::new(WidgetClass::JTextField, &input_name);
        input.bound_value_id = Some(v.id.clone());
        rows.push(input);
        row_styles.push(StyleProperty { part_name: label_name.clone(), name: "text".into(), value: v.label().into() });
        row_styles.push(StyleProperty { part_name: label_name, name: "for".into(), value: input_name });
    }
    fill_insertion(&mut shell, rows);

    let mut help = instantiate_fragment(templates, HELP_FRAME, &ctx, None)?;
    // help frames start hidden unless the template already says otherwise
    for root in &help.parts {
        let has_visible = help.styles.iter().any(|s| s.part_name == root.name && s.name == "visible");
        if root.widget_class == WidgetClass::JFrame && !has_visible {
            help.styles.push(StyleProperty {
                part_name: root.name.clone(),
                name: "visible".into(),
                value: "false".into(),
            });
        }
    }
    Ok(EntityBuild { key: key.to_string(), shell, help, row_styles })
}

/// Compiles a valid profile into one interface document: an app shell with
/// one panel per medcomp (in profile order), one hidden help frame per
/// medcomp, the help show/hide rules, and the profile's peers.
pub fn compile_profile(profile: &PatientProfile, templates: &TemplateSet) -> Result<UiDocument, CompileError> {
    let diagnostics = validate_profile(profile);
    if has_errors(&diagnostics) {
        return Err(ValidationError { diagnostics }.into());
    }

    let app_ctx = BTreeMap::from([("patient_id".to_string(), profile.patient_id.clone())]);
    let mut app = instantiate_fragment(templates, APP_SHELL, &app_ctx, Some(ENTITIES_PLACEHOLDER))?;
    let mut names: BTreeSet<String> = BTreeSet::new();
    for name in fragment_names(&app) {
        if !names.insert(name.clone()) {
            return Err(CompileError::DuplicatePart(name));
        }
    }

    let mut taken = BTreeSet::new();
    let mut entities = Vec::new();
    for mc in &profile.medcomps {
        let mut attempt = 0;
        let build = loop {
            let key = derive_entity_key(mc, &taken)?;
            let build = build_entity(templates, mc, &key)?;
            let generated: Vec<String> =
                fragment_names(&build.shell).into_iter().chain(fragment_names(&build.help)).collect();
            let unique: BTreeSet<&String> = generated.iter().collect();
            if unique.len() != generated.len() {
                let dup = generated.iter().find(|n| generated.iter().filter(|m| m == n).count() > 1);
                return Err(CompileError::DuplicatePart(dup.cloned().unwrap_or_default()));
            }
            if generated.iter().all(|n| !names.contains(n)) {
                names.extend(generated);
                break build;
            }
            // A generated name collides with an earlier entity or the shell:
            // reserve this key and derive the next one.
            taken.insert(key);
            attempt += 1;
            if attempt >= MAX_KEY_ATTEMPTS {
                return Err(CompileError::DuplicatePart(mc.name.clone()));
            }
        };
        taken.insert(build.key.clone());
        entities.push(build);
    }

    let mut styles = std::mem::take(&mut app.styles);
    let mut behavior = std::mem::take(&mut app.rules);
    let mut panels = Vec::new();
    let mut help_roots = Vec::new();
    for build in entities {
        let EntityBuild { shell, help, row_styles, .. } = build;
        panels.extend(shell.parts);
        styles.extend(shell.styles);
        styles.extend(row_styles);
        behavior.extend(shell.rules);
        help_roots.extend(help.parts);
        styles.extend(help.styles);
        behavior.extend(help.rules);
    }
    fill_insertion(&mut app, panels);

    let mut parts = app.parts;
    parts.extend(help_roots);

    // styles follow part pre-order; order within one part is template order
    let order: BTreeMap<&str, usize> =
        parts.iter().flat_map(Part::walk).enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    styles.sort_by_key(|s| order.get(s.part_name.as_str()).copied().unwrap_or(usize::MAX));

    let peers = profile.medcomps.iter().flat_map(|mc| mc.retrieves.iter().cloned()).collect();
    let doc = UiDocument { parts, styles, behavior, peers };
    doc.check()?;
    Ok(doc)
}
