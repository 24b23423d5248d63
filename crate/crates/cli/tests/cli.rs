//! The `rhino` binary end to end.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use rhino_core::intention::CentroidModel;
use rhino_core::skillspec::{builtin_scenario, DINING_SCENARIO};

fn rhino(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhino")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn assert_single_line_error(o: &Output) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

const SCRIPT: &str = r#"[
    {"from_tick": 0, "to_tick": 20, "intention": "Pointing Can"},
    {"from_tick": 60, "to_tick": 70, "intention": "Pointing Can", "disturbance": "contact"},
    {"from_tick": 200, "to_tick": 230, "intention": "Waving"},
    {"from_tick": 300, "to_tick": 330, "intention": "Cancel"}
]"#;

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_summarizes_builtin_and_file_scenarios() {
    let o = rhino(&["validate", "--scenario", "dining"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("17 skills, 4 objects\n"), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dining.scenario.json");
    fs::write(&file, DINING_SCENARIO).unwrap();
    let o = rhino(&["validate", "--scenario", p(&file)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("17 skills, 4 objects\n"));

    let o = rhino(&["validate", "--scenario", "office"]);
    assert!(stdout(&o).starts_with("13 skills, 4 objects\n"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, DINING_SCENARIO.replacen("\"Pick Can\"", "\"Place Can\"", 1)).unwrap();
    assert_single_line_error(&rhino(&["validate", "--scenario", p(&broken)]));
    assert_single_line_error(&rhino(&["validate", "--scenario", "kitchen"]));
}

#[test]
fn runs_replay_clean_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    fs::write(&script, SCRIPT).unwrap();
    let a = dir.path().join("a.trace.jsonl");
    let b = dir.path().join("b.trace.jsonl");
    for out in [&a, &b] {
        let o = rhino(&[
            "run",
            "--scenario",
            "dining",
            "--script",
            p(&script),
            "--seed",
            "4",
            "--ticks",
            "400",
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("over 400 ticks"));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    #[cfg(unix)]
    {
        // Same mode as any file the user creates, not the 0600 of a temp file.
        use std::os::unix::fs::PermissionsExt;
        let mode = |f: &Path| fs::metadata(f).unwrap().permissions().mode() & 0o777;
        assert_eq!(mode(&a), mode(&script));
    }

    let o = rhino(&["replay", "--scenario", "dining", "--trace", p(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("clean: "));

    let tampered = dir.path().join("t.trace.jsonl");
    fs::write(&tampered, text.replacen("\"SkillStarted\"", "\"SkillSucceeded\"", 1)).unwrap();
    let o = rhino(&["replay", "--scenario", "dining", "--trace", p(&tampered)]);
    assert_single_line_error(&o);
    assert!(stderr(&o).contains("diverged at event"), "{}", stderr(&o));

    let o = rhino(&["replay", "--scenario", "office", "--trace", p(&a)]);
    assert_single_line_error(&o);
}

#[test]
fn metrics_names_skills() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    fs::write(&script, SCRIPT).unwrap();
    let trace = dir.path().join("run.trace.jsonl");
    assert!(rhino(&[
        "run",
        "--scenario",
        "dining",
        "--script",
        p(&script),
        "--seed",
        "1",
        "--ticks",
        "400",
        "--out",
        p(&trace)
    ])
    .status
    .success());
    let o = rhino(&["metrics", "--trace", p(&trace)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Pick Can"), "{table}");
}

#[test]
fn failed_runs_leave_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    fs::write(&out, "previous").unwrap();
    let script = dir.path().join("bad.json");
    fs::write(&script, r#"[{"from_tick": 0, "to_tick": 10, "intention": "Juggling"}]"#).unwrap();
    let o = rhino(&[
        "run",
        "--scenario",
        "dining",
        "--script",
        p(&script),
        "--seed",
        "1",
        "--out",
        p(&out),
    ]);
    assert_single_line_error(&o);
    assert!(stderr(&o).contains("Juggling"));
    assert_eq!(fs::read_to_string(&out).unwrap(), "previous");

    let o = rhino(&[
        "run",
        "--scenario",
        "dining",
        "--seed",
        "1",
        "--ticks",
        "50",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    let names: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn usage_errors_are_single_lines() {
    for args in [
        &["run", "--scenario", "dining", "--out", "x.jsonl"][..],
        &["run", "--scenario", "dining", "--seed", "x", "--out", "x.jsonl"],
        &["graph", "--scenario", "dining", "--colour"],
        &["launch"],
        &["serve", "--snapshot-decimation", "0"],
    ] {
        let o = rhino(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_single_line_error(&o);
    }
}

#[test]
fn graph_emits_dot() {
    let o = rhino(&["graph", "--scenario", "office", "--dot"]);
    assert!(o.status.success());
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("\"[none,stamp]\""), "{dot}");
    assert!(dot.contains("label=\"Place Stamp\""), "{dot}");
    let o = rhino(&["graph", "--scenario", "dining"]);
    assert!(stdout(&o).contains("[none,none] -> [none,can]  Pick Can"));
}

#[test]
fn fit_builds_a_loadable_model() {
    let s = builtin_scenario("dining").unwrap();
    let entries: Vec<String> = s
        .intentions
        .iter()
        .enumerate()
        .map(|(k, i)| {
            format!(
                r#"{{"from_tick": {}, "to_tick": {}, "intention": "{}"}}"#,
                k * 30,
                k * 30 + 30,
                i.name
            )
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("tour.json");
    fs::write(&script, format!("[{}]", entries.join(","))).unwrap();
    let trace = dir.path().join("tour.trace.jsonl");
    assert!(rhino(&[
        "run",
        "--scenario",
        "dining",
        "--script",
        p(&script),
        "--seed",
        "2",
        "--out",
        p(&trace)
    ])
    .status
    .success());
    let model = dir.path().join("model.json");
    let o = rhino(&["fit", "--trace", p(&trace), "--out", p(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(&format!("{} classes", s.intentions.len())));
    let m = CentroidModel::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.classes().len(), s.intentions.len());

    // A trace that never shows most intentions cannot define their classes.
    let short = dir.path().join("short.trace.jsonl");
    assert!(rhino(&[
        "run",
        "--scenario",
        "dining",
        "--seed",
        "2",
        "--ticks",
        "30",
        "--out",
        p(&short)
    ])
    .status
    .success());
    assert_single_line_error(&rhino(&["fit", "--trace", p(&short), "--out", p(&model)]));
}

#[test]
fn serve_answers_http() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rhino"))
        .args(["serve", "--port", "0", "--scenario", "office"])
        .env("RHINO_LOG", "info")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .expect(&line)
        .to_string();

    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(
        conn,
        "GET /scenarios HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    conn.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["name"], "office");
}
