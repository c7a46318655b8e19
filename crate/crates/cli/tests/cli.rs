use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn labelint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelint"))
        .args(args)
        .output()
        .expect("spawn labelint")
}

fn app(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/corpus")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn single_app_contrary_exits_two() {
    let dir = app("app_b");
    let out = labelint(&[
        "check",
        "--label",
        s(&dir.join("label.json")),
        "--har",
        s(&dir.join("traffic.har")),
        "--meta",
        s(&dir.join("meta.json")),
        "--frida",
        s(&dir.join("frida.jsonl")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["totals"]["Contrary"], 1);
    assert_eq!(r["per_app"][0]["app_id"], "com.betaradio.player");
}

#[test]
fn consistent_app_exits_zero() {
    let dir = app("app_c");
    let out = labelint(&[
        "check",
        "--label",
        s(&dir.join("label.json")),
        "--har",
        s(&dir.join("traffic.har")),
        "--meta",
        s(&dir.join("meta.json")),
        "--policy",
        s(&dir.join("policy.jsonl")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["totals"]["Consistent"], 1);
}

#[test]
fn missing_capture_names_ingest_stage() {
    let dir = app("app_c");
    let out = labelint(&[
        "check",
        "--label",
        s(&dir.join("label.json")),
        "--har",
        "/nonexistent/traffic.har",
        "--meta",
        s(&dir.join("meta.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(
        err.trim(),
        "error: ingest: file not found: /nonexistent/traffic.har"
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn corpus_writes_findings_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = app("");
    let findings = tmp.path().join("findings.jsonl");
    let csv = tmp.path().join("csv");
    let report = tmp.path().join("report.json");
    let out = labelint(&[
        "check",
        "--corpus",
        s(&corpus),
        "--findings",
        s(&findings),
        "--csv",
        s(&csv),
        "--out",
        s(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let lines: Vec<serde_json::Value> = fs::read_to_string(&findings)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    let kinds: Vec<&str> = lines.iter().map(|l| l["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["Neglect", "Contrary", "Consistent"]);
    for name in [
        "matrix.csv",
        "item_totals.csv",
        "endpoints.csv",
        "partition.csv",
    ] {
        assert!(csv.join(name).is_file(), "{name}");
    }

    // a saved report summarizes to the same totals
    let out = labelint(&["summarize", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json(&out)["totals"], saved["totals"]);
}

#[test]
fn summarize_rejects_duplicate_apps() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r.json");
    let dir = app("app_c");
    let ok = labelint(&[
        "check",
        "--label",
        s(&dir.join("label.json")),
        "--har",
        s(&dir.join("traffic.har")),
        "--meta",
        s(&dir.join("meta.json")),
        "--out",
        s(&report),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let out = labelint(&["summarize", s(&report), s(&report)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn partition_command() {
    let tmp = tempfile::tempdir().unwrap();
    let alpha = tmp.path().join("alpha.txt");
    let beta = tmp.path().join("beta.txt");
    fs::write(&alpha, "a\nb\n\n# comment\n").unwrap();
    fs::write(&beta, "b\nc\n").unwrap();
    let out = labelint(&["partition", "--alpha", s(&alpha), "--beta", s(&beta)]);
    assert_eq!(out.status.code(), Some(0));
    let p = json(&out);
    assert_eq!(p["mu"], serde_json::json!(["a"]));
    assert_eq!(p["gamma"], serde_json::json!(["b"]));
    assert_eq!(p["nu"], serde_json::json!(["c"]));
}

#[test]
fn scan_binary_command() {
    let out = labelint(&["scan-binary", s(&app("app_a").join("app.bin"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["items"], serde_json::json!(["Device ID"]));
}

#[test]
fn compare_policy_command() {
    let dir = app("app_a");
    let out = labelint(&[
        "compare-policy",
        "--label",
        s(&dir.join("label.json")),
        "--policy",
        s(&dir.join("policy.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["beta_member"], true);
    assert_eq!(r["findings"][0]["kind"], "Neglect");
}

#[test]
fn ingest_then_infer_matches_check() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = app("app_b");
    let bundle = tmp.path().join("bundle.json");
    let out = labelint(&[
        "ingest",
        "--har",
        s(&dir.join("traffic.har")),
        "--frida",
        s(&dir.join("frida.jsonl")),
        "--out",
        s(&bundle),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = labelint(&[
        "infer",
        "--obs",
        s(&bundle),
        "--meta",
        s(&dir.join("meta.json")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["flows"][0]["item"], "Device ID");
    assert_eq!(
        r["flows"][0]["purposes"],
        serde_json::json!(["Third-Party Advertising"])
    );
    assert_eq!(r["observations"][0]["verdict"]["rule_id"], "R1");
}

#[test]
fn config_thresholds_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.toml");
    // a value floor above the UUID length disables value matching
    fs::write(&config, "[thresholds]\nmin_value_len = 64\n").unwrap();
    let dir = app("app_b");
    let out = labelint(&[
        "check",
        "--config",
        s(&config),
        "--label",
        s(&dir.join("label.json")),
        "--har",
        s(&dir.join("traffic.har")),
        "--meta",
        s(&dir.join("meta.json")),
        "--frida",
        s(&dir.join("frida.jsonl")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["totals"]["Contrary"], 0);
}

#[test]
fn corpus_conflicts_with_single_app_flags() {
    let out = labelint(&["check", "--corpus", "x", "--label", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be used with"));
}
