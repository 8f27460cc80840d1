use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rbwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbwe")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rbwe(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn generate_counts_sessions_times_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let data = dir.path().join("data.jsonl");
    ok(&["traces", "--out", s(&traces), "--count", "10", "--duration-ms", "30000", "--seed", "4"]);
    ok(&["generate", "--traces", s(&traces), "--duration-ms", "30000", "--seed", "4", "--out", s(&data), "--jobs", "2"]);
    assert_eq!(lines(&data), 10 * 3 * (30_000 / 60));
}

#[test]
fn input_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = dir.path().join("x.jsonl");
    assert_eq!(rbwe(&["generate", "--traces", s(&empty), "--out", s(&out)]).status.code(), Some(2));

    let bad = dir.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("broken.json"), "{\"name\": \"b\", \"events\": [}").unwrap();
    let res = rbwe(&["generate", "--traces", s(&bad), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("broken.json") && stderr.contains("line 1"), "{stderr}");

    assert_eq!(rbwe(&["generate", "--traces", s(&bad), "--out", s(&out), "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(rbwe(&["train", "--data", s(&dir.path().join("missing.jsonl")), "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn every_subcommand_documents_its_flags() {
    let expected: &[(&str, &[&str])] = &[
        ("traces", &["--out", "--count", "--duration-ms", "--seed", "--prefix"]),
        ("generate", &["--traces", "--behaviors", "--duration-ms", "--seed", "--out", "--jobs"]),
        ("train", &["--data", "--out", "--config", "--steps", "--seed", "--beta", "--tau", "--gamma", "--log"]),
        ("eval-offline", &["--data", "--policy", "--model", "--traces", "--delta", "--recurrent", "--out", "--jobs"]),
        ("simulate", &["--traces", "--controller", "--model", "--gate", "--tau-u", "--seed", "--out", "--jobs"]),
        ("report", &["--inputs", "--out"]),
        ("dump-gmm", &["--model", "--data", "--index", "--scale"]),
        ("rerun", &["--manifest"]),
    ];
    for (cmd, flags) in expected {
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for flag in *flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

struct Pipeline {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Pipeline {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// A miniature end-to-end run, small enough for a unit-test budget.
fn pipeline() -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline { root: dir.path().to_owned(), _dir: dir };
    let traces = p.path("traces");
    ok(&["traces", "--out", s(&traces), "--count", "3", "--duration-ms", "6000", "--seed", "1"]);
    ok(&["generate", "--traces", s(&traces), "--duration-ms", "6000", "--seed", "2", "--out", s(&p.path("data.jsonl"))]);
    ok(&[
        "train", "--data", s(&p.path("data.jsonl")), "--out", s(&p.path("model.rbwe")), "--steps", "4", "--batch-size", "32",
        "--members", "3", "--hidden", "16", "--seed", "3",
    ]);
    ok(&[
        "eval-offline", "--data", s(&p.path("data.jsonl")), "--model", s(&p.path("model.rbwe")), "--traces", s(&traces),
        "--out", s(&p.path("offline.csv")), "--jobs", "2",
    ]);
    ok(&[
        "eval-offline", "--data", s(&p.path("data.jsonl")), "--policy", "behavior", "--traces", s(&traces),
        "--out", s(&p.path("behavior.csv")),
    ]);
    for controller in ["aimd", "hybrid"] {
        ok(&[
            "simulate", "--traces", s(&traces), "--controller", controller, "--model", s(&p.path("model.rbwe")),
            "--duration-ms", "6000", "--seed", "5", "--out", s(&p.path(controller)), "--jobs", "2",
        ]);
    }
    ok(&["report", "--inputs", s(&p.path("aimd")), s(&p.path("hybrid")), "--out", s(&p.path("report"))]);
    p
}

#[test]
fn pipeline_outputs_and_reruns() {
    let p = pipeline();
    assert_eq!(lines(&p.path("offline.csv")), 1 + 3 * 3 * 100);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.path("behavior.csv.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["estimate"], metrics["behavior"]);

    let summary = std::fs::read_to_string(p.path("report/summary.csv")).unwrap();
    assert!(summary.starts_with("controller,metric,mean,std,p10,sessions"));
    assert!(summary.contains("aimd,qoe,") && summary.contains("hybrid,qoe,"));
    assert_eq!(lines(&p.path("report/cdf_qoe.csv")), 1 + 6);
    assert_eq!(lines(&p.path("hybrid/decisions/trace-000.csv")), 1 + 100);

    let dump = ok(&["dump-gmm", "--model", s(&p.path("model.rbwe")), "--data", s(&p.path("data.jsonl")), "--index", "7"]);
    let dump: serde_json::Value = serde_json::from_slice(&dump.stdout).unwrap();
    assert_eq!(dump["weights"].as_array().unwrap().len(), 4);

    let manifests = [
        "traces/manifest.json",
        "data.jsonl.manifest.json",
        "model.rbwe.manifest.json",
        "offline.csv.manifest.json",
        "behavior.csv.manifest.json",
        "aimd/manifest.json",
        "hybrid/manifest.json",
        "report/manifest.json",
    ];
    for m in manifests {
        let out = ok(&["rerun", "--manifest", s(&p.path(m))]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced identically"), "{m}");
    }
}

#[test]
fn rerun_detects_changed_outputs_and_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let data = dir.path().join("data.jsonl");
    ok(&["traces", "--out", s(&traces), "--count", "2", "--duration-ms", "3000"]);
    ok(&["generate", "--traces", s(&traces), "--duration-ms", "3000", "--out", s(&data)]);
    let manifest = dir.path().join("data.jsonl.manifest.json");

    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = "00".into();
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, m.to_string()).unwrap();
    assert_eq!(rbwe(&["rerun", "--manifest", s(&tampered)]).status.code(), Some(3));

    std::fs::write(traces.join("trace-000.json"), std::fs::read_to_string(traces.join("trace-001.json")).unwrap().replace("trace-001", "trace-000")).unwrap();
    assert_eq!(rbwe(&["rerun", "--manifest", s(&manifest)]).status.code(), Some(2));
}
