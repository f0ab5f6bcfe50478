mod common;

use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::{bp_profile, fixture, fixture_path, submission};
use medforge_core::Store;
use medforge_gateway::auth::{Credential, CredentialSet, Role};
use serde_json::{json, Value};

fn medforge() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_medforge"));
    for var in ["MEDFORGE_DATA", "MEDFORGE_PORT", "MEDFORGE_TEMPLATES", "MEDFORGE_WEBHOOK", "MEDFORGE_CREDENTIALS"] {
        cmd.env_remove(var);
    }
    cmd.env("MEDFORGE_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    medforge().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

fn bp_path() -> String {
    fixture_path("blood-pressure.xml").to_str().unwrap().to_string()
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", &bp_path()]);
    assert_eq!(code(&ok), 0, "{}", text(&ok.stderr));
    assert!(text(&ok.stdout).contains("valid (1 medComps, 3 values)"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.xml",
        &fixture("blood-pressure.xml").replace(r#"left="00215062000112dia""#, r#"left="ghost""#),
    );
    let out = run(&["validate", &bad]);
    assert_eq!(code(&out), 1);
    assert!(text(&out.stderr).contains("DANGLING_IDREF"));

    let broken = write(dir.path(), "broken.xml", "<profile");
    assert_eq!(code(&run(&["validate", &broken])), 1);
    assert_eq!(code(&run(&["validate", "/no/such/file.xml"])), 2);
    assert_eq!(code(&run(&["validate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn compile_writes_the_golden() {
    let out = run(&["compile", &bp_path()]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout), fixture("bp.golden.uiml"));

    let templates = fixture_path("../templates");
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("bp.uiml");
    let out = run(&["compile", &bp_path(), "--templates", templates.to_str().unwrap(), "-o", target.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&target).unwrap(), fixture("bp.golden.uiml"));

    let again = run(&["compile", &bp_path()]);
    assert_eq!(again.stdout, run(&["compile", &bp_path()]).stdout);
}

#[test]
fn compile_widget_json() {
    let out = run(&["compile", &bp_path(), "--format", "widget-json"]);
    assert_eq!(code(&out), 0);
    let tree: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(tree["patient_id"], "p1");
    assert_eq!(code(&run(&["compile", &bp_path(), "--format", "pdf"])), 2);
}

#[test]
fn compile_template_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["compile", &bp_path(), "--templates", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("cannot load templates"));

    let out = medforge().args(["compile", &bp_path()]).env("MEDFORGE_TEMPLATES", dir.path()).output().unwrap();
    assert_eq!(code(&out), 2, "the env var is honoured");
}

#[test]
fn check_submission_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let case =
        |name: &str, sys: &str, dia: &str| write(dir.path(), name, &submission("p1", "08:00", sys, dia).to_string());
    let fine = run(&["check-submission", &bp_path(), &case("fine.json", "12", "8")]);
    assert_eq!(code(&fine), 0);
    let outcome: Value = serde_json::from_slice(&fine.stdout).unwrap();
    assert_eq!(outcome["status"], "accepted");

    let high = run(&["check-submission", &bp_path(), &case("high.json", "24", "8")]);
    assert_eq!(code(&high), 1);
    let outcome: Value = serde_json::from_slice(&high.stdout).unwrap();
    assert_eq!(outcome["status"], "accepted");
    assert_eq!(outcome["findings"][0]["kind"], "max");

    let typed = run(&["check-submission", &bp_path(), &case("typed.json", "abc", "8")]);
    assert_eq!(code(&typed), 1);
    let outcome: Value = serde_json::from_slice(&typed.stdout).unwrap();
    assert_eq!(outcome["rejections"][0]["code"], "TYPE_ERROR");

    let garbage = write(dir.path(), "garbage.json", "{\"values\":");
    assert_eq!(code(&run(&["check-submission", &bp_path(), &garbage])), 2);
}

#[test]
fn hash_password_emits_a_usable_line() {
    let mut child = medforge()
        .args(["hash-password", "doc1", "doctor"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"s3cret\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    let set = CredentialSet::parse(&text(&out.stdout)).unwrap();
    assert_eq!(set.authenticate("doc1", "s3cret").unwrap().role, Role::Doctor);
    assert_eq!(code(&run(&["hash-password", "doc1", "janitor"])), 2);
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

async fn wait_for_login(base: &str, client: &reqwest::Client) -> String {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let sent = client
            .post(format!("{base}/api/login"))
            .body(json!({"principal": "p1", "password": "pw1"}).to_string())
            .send()
            .await;
        if let Ok(resp) = sent {
            let body: Value = serde_json::from_str(&resp.text().await.unwrap()).unwrap();
            return body["token"].as_str().unwrap().to_string();
        }
        assert!(Instant::now() < deadline, "server did not come up");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

#[tokio::test]
async fn serve_survives_a_restart() {
    let data = tempfile::tempdir().unwrap();
    Store::open_dir(data.path()).unwrap().store_profile("p1", &bp_profile(), 0).unwrap();
    std::fs::write(data.path().join("credentials"), Credential::new("p1", Role::Patient, "pw1").to_line() + "\n")
        .unwrap();
    let port = free_port();
    let base = format!("http://127.0.0.1:{port}");
    let client = reqwest::Client::new();
    let start = || {
        Served(
            medforge()
                .args(["serve", "--data", data.path().to_str().unwrap()])
                .env("MEDFORGE_PORT", port.to_string())
                .spawn()
                .unwrap(),
        )
    };

    let server = start();
    let token = wait_for_login(&base, &client).await;
    let resp = client
        .post(format!("{base}/api/patients/p1/submissions"))
        .bearer_auth(&token)
        .body(submission("p1", "08:00", "24", "8").to_string())
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    drop(server);

    let _server = start();
    let token = wait_for_login(&base, &client).await;
    let records = client.get(format!("{base}/api/patients/p1/records")).bearer_auth(&token).send().await.unwrap();
    let records: Value = serde_json::from_str(&records.text().await.unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 1);
}

#[test]
fn serve_reports_missing_credentials() {
    let data = tempfile::tempdir().unwrap();
    let out = run(&["serve", "--data", data.path().to_str().unwrap(), "--port", "0"]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("cannot load credentials"));
}
