//! The `medforge` command line.
//!
//! Exit codes: 0 success, 1 the input has findings (invalid profile,
//! rejected submission, bound breach), 2 usage or I/O error.

use std::io::{self, BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use medforge_core::profile_io::{has_errors, read_profile, ProfileDiagnostic};
use medforge_core::store::SystemClock;
use medforge_core::{validate_submission, PatientProfile, Store, SubmissionInput, TemplateSet};

use crate::api::{router, AppState};
use crate::auth::{Credential, CredentialSet, Role, Sessions};
use crate::webhook::{Webhook, WebhookConfig};
use crate::{render_ui, UiFormat};

pub const OK: u8 = 0;
pub const FINDINGS: u8 = 1;
pub const USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "medforge", version, about = "Compile patient profiles into data-entry interfaces and serve them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a profile document and print its diagnostics.
    Validate { profile: PathBuf },
    /// Compile a profile into UIML or widget-tree JSON.
    Compile {
        profile: PathBuf,
        /// Template directory; the built-in templates are used when absent.
        #[arg(long, env = "MEDFORGE_TEMPLATES")]
        templates: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "uiml")]
        format: UiFormat,
    },
    /// Run a submission JSON file through the validation pipeline.
    CheckSubmission { profile: PathBuf, submission: PathBuf },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Read a password from stdin and print a credential-file line.
    HashPassword { principal: String, role: Role },
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long, env = "MEDFORGE_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "MEDFORGE_TEMPLATES")]
    pub templates: Option<PathBuf>,
    #[arg(long, env = "MEDFORGE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "MEDFORGE_BIND", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub bind: IpAddr,
    /// URL that receives each new alert as a JSON POST.
    #[arg(long, env = "MEDFORGE_WEBHOOK")]
    pub webhook: Option<String>,
    /// Credential file; defaults to `<data>/credentials`.
    #[arg(long, env = "MEDFORGE_CREDENTIALS")]
    pub credentials: Option<PathBuf>,
    /// Session lifetime in seconds.
    #[arg(long, default_value_t = 12 * 3600)]
    pub session_ttl: u64,
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            USAGE
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<u8> {
    match command {
        Command::Validate { profile } => {
            let text = read_text(&profile)?;
            let Some(report) = check_profile(&text, &profile, err)? else { return Ok(FINDINGS) };
            let values: usize = report.medcomps.iter().map(|m| m.values.len()).sum();
            writeln!(out, "{}: valid ({} medComps, {values} values)", profile.display(), report.medcomps.len())?;
            Ok(OK)
        }
        Command::Compile { profile, templates, output, format } => {
            let text = read_text(&profile)?;
            let templates = load_templates(templates.as_deref())?;
            let Some(parsed) = check_profile(&text, &profile, err)? else { return Ok(FINDINGS) };
            let rendered = match render_ui(&parsed, &templates, format) {
                Ok(r) => r,
                Err(e) => {
                    writeln!(err, "{}: {e}", profile.display())?;
                    return Ok(FINDINGS);
                }
            };
            match output {
                Some(path) => {
                    std::fs::write(&path, rendered).with_context(|| format!("cannot write {}", path.display()))?
                }
                None => out.write_all(rendered.as_bytes())?,
            }
            Ok(OK)
        }
        Command::CheckSubmission { profile, submission } => {
            let text = read_text(&profile)?;
            let input: SubmissionInput = serde_json::from_str(&read_text(&submission)?)
                .with_context(|| format!("{} is not a submission document", submission.display()))?;
            let Some(parsed) = check_profile(&text, &profile, err)? else { return Ok(FINDINGS) };
            let outcome = validate_submission(&parsed, &input);
            writeln!(out, "{}", serde_json::to_string_pretty(&outcome)?)?;
            Ok(if outcome.is_accepted() && outcome.findings.is_empty() { OK } else { FINDINGS })
        }
        Command::Serve(args) => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(args))?;
            Ok(OK)
        }
        Command::HashPassword { principal, role } => {
            let mut password = String::new();
            io::stdin().lock().read_line(&mut password)?;
            let password = password.trim_end_matches(['\r', '\n']);
            if password.is_empty() {
                anyhow::bail!("no password on stdin");
            }
            writeln!(out, "{}", Credential::new(&principal, role, password).to_line())?;
            Ok(OK)
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_templates(dir: Option<&Path>) -> anyhow::Result<TemplateSet> {
    match dir {
        Some(d) => TemplateSet::load_dir(d).with_context(|| format!("cannot load templates from {}", d.display())),
        None => Ok(TemplateSet::builtin()),
    }
}

fn print_diagnostics(path: &Path, diagnostics: &[ProfileDiagnostic], err: &mut dyn Write) -> io::Result<()> {
    for d in diagnostics {
        writeln!(err, "{}: {d}", path.display())?;
    }
    Ok(())
}

/// Prints diagnostics and returns the profile when it has no errors.
fn check_profile(text: &str, path: &Path, err: &mut dyn Write) -> anyhow::Result<Option<PatientProfile>> {
    let report = match read_profile(text) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(None);
        }
    };
    print_diagnostics(path, &report.diagnostics, err)?;
    Ok((!has_errors(&report.diagnostics)).then_some(report.profile))
}

pub async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let templates = Arc::new(load_templates(args.templates.as_deref())?);
    let cred_path = args.credentials.clone().unwrap_or_else(|| args.data.join("credentials"));
    let credentials = CredentialSet::load(&cred_path)
        .with_context(|| format!("cannot load credentials from {}", cred_path.display()))?;
    if credentials.is_empty() {
        tracing::warn!("{} lists no principals; nobody can log in", cred_path.display());
    }
    let data = args.data.clone();
    let store = tokio::task::spawn_blocking(move || Store::open_dir(data))
        .await?
        .with_context(|| format!("cannot open the store in {}", args.data.display()))?;
    let webhook = args.webhook.map(|url| Webhook::spawn(WebhookConfig::new(url)).0);
    let sessions = Sessions::new(chrono::Duration::seconds(args.session_ttl as i64), Arc::new(SystemClock));
    let state = Arc::new(AppState::new(Arc::new(store), templates, credentials, sessions, webhook));

    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot listen on {addr}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
