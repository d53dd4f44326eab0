use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn kextract(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kextract"))
        .args(args)
        .env_remove("KEXTRACT_API_KEY")
        .env_remove("KEXTRACT_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_script(dir: &Path, name: &str, lines: &[&str]) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(lines).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn eval_text_matches_golden_file() {
    let o = kextract(&["eval", "kitchen35", "kitchen35"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), include_str!("golden/eval_kitchen35.txt"));
}

#[test]
fn eval_csv_and_json() {
    let csv = kextract(&["eval", "kitchen35", "kitchen35", "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "category,count,percent");
    assert!(lines[5].starts_with("total,135,"));

    let a = kextract(&["eval", "kitchen35", "kitchen35", "--format", "json"]);
    let b = kextract(&["eval", "kitchen35", "kitchen35", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["v"], 1);
    assert_eq!(v["viability_agreement"], v["responses"]);
}

#[test]
fn validation_errors_exit_one() {
    let o = kextract(&["eval", "kitchen35", "kitchen35", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown report format"));
    assert_eq!(kextract(&["learn", "attic"]).status.code(), Some(1));
    assert_eq!(kextract(&["learn", "mailroom"]).status.code(), Some(1));
}

#[test]
fn backend_errors_exit_two() {
    let o = kextract(&["learn", "pantry", "--backend", "live", "--endpoint", "http://127.0.0.1:9/v1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("KEXTRACT_API_KEY"));
    // the kitchen corpus has no answer for the pantry prompt
    let o = kextract(&["learn", "pantry", "--backend", "replay", "--corpus", "kitchen35"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn learn_then_reuse_rules() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "s.json",
        &["The goal is that the beans is in the attic.", "The goal is that the beans is in the pantry."],
    );
    let rules = dir.path().join("rules.json");
    let rules_arg = rules.to_string_lossy().into_owned();
    let o = kextract(&[
        "learn", "pantry", "--backend", "scripted", "--script", &script, "--rules", &rules_arg,
        "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(first["llm_calls"], 2);
    assert_eq!(first["repairs"], 1);
    assert!(rules.exists());

    let empty = write_script(dir.path(), "empty.json", &[]);
    let o = kextract(&[
        "learn", "pantry", "--backend", "scripted", "--script", &empty, "--rules", &rules_arg,
        "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let second: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(second["llm_calls"], 0);
    assert_eq!(second["final_digest"], first["final_digest"]);
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "s.json", &["The goal is that the beans is in the pantry."]);
    let corpus = dir.path().join("corpus.ndjson");
    let corpus_arg = corpus.to_string_lossy().into_owned();
    let o = kextract(&["record", "pantry", "--backend", "scripted", "--script", &script, "--out", &corpus_arg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&corpus).unwrap().lines().count(), 1);
    let o = kextract(&["learn", "pantry", "--backend", "replay", "--corpus", &corpus_arg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objects: 1 processed, 1 achieved"));
}

#[test]
fn interactive_learn_reads_decisions_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(
        dir.path(),
        "s.json",
        &["The goal is that the beans is in the sink.", "The goal is that the beans is in the pantry."],
    );
    let mut child = Command::new(env!("CARGO_BIN_EXE_kextract"))
        .args(["learn", "pantry", "--interactive", "--backend", "scripted", "--script", &script, "--format", "json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"n\na\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["tally"]["viable_not_reasonable"], 1);
    assert_eq!(report["tally"]["situationally_relevant"], 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checks: interpretable ok, groundable ok, affordable ok"));
}

#[test]
fn serve_answers_over_tcp() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_kextract"))
        .args(["serve", "kitchen35", "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut err = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    err.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();

    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(conn, "GET /state HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    conn.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body = &resp[resp.find("\r\n\r\n").unwrap() + 4..];
    let v: Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["world"]["objects"].as_array().unwrap().len(), 35);
}
