//! End-to-end checks of the `collegial-bench` binary: every subcommand is
//! exercised against the shipped fixtures or a scripted run directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collegial-bench"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn parse_reads_stdin() {
    let mut child = binary()
        .arg("parse")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("判处有期徒刑三年六个月。".as_bytes())
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    assert_eq!(stdout_of(&output).trim(), "42");

    let mut child = binary()
        .arg("parse")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"nothing here")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert_eq!(stdout_of(&output).trim(), "none");
}

#[test]
fn validate_reports_each_line() {
    let output = binary()
        .args(["validate", "--dataset"])
        .arg(fixture("cases_small.jsonl"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = stdout_of(&output);
    assert!(stdout.contains("line 1: ok"));
    assert!(stdout.contains("3 records checked, 0 bad"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"x\"}\n").unwrap();
    let output = binary()
        .args(["validate", "--dataset"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(stdout_of(&output).contains("line 1"));
}

#[test]
fn replay_prints_the_full_deliberation() {
    let output = binary()
        .args(["replay", "--script"])
        .arg(fixture("deliberation_script.json"))
        .arg("--case")
        .arg(fixture("sample_case.jsonl"))
        .arg("--pool")
        .arg(fixture("agent_pool.jsonl"))
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = stdout_of(&output);
    assert!(stdout.contains("=== Round 1 ==="));
    assert!(stdout.contains("=== Round 2 ==="));
    assert!(stdout.contains("Final judgment: 54 months after 2 round(s); consensus reached: true"));
}

#[test]
fn kappa_prints_criteria_and_rates() {
    let output = binary()
        .args(["kappa", "--annotations"])
        .arg(fixture("annotations.csv"))
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = stdout_of(&output);
    for criterion in ["legality", "logicality", "morality"] {
        assert!(
            stdout.contains(&format!("{criterion} pairwise kappa:")),
            "{stdout}"
        );
        assert!(stdout.contains(&format!("{criterion} rate:")), "{stdout}");
    }
}

#[test]
fn run_score_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // Scripted outputs hitting the fixture golds (24, 42, 30) exactly.
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::to_string_pretty(&["刑期：24个月", "刑期：42个月", "刑期：30个月"]).unwrap(),
    )
    .unwrap();
    let run_dir = dir.path().join("run-standard");
    let output = binary()
        .args(["run", "--method", "standard", "--model", "demo-model"])
        .arg("--dataset")
        .arg(fixture("cases_small.jsonl"))
        .arg("--out")
        .arg(&run_dir)
        .arg("--script")
        .arg(&script)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(stdout_of(&output).contains("3/3 cases completed"));
    assert!(run_dir.join("manifest.json").is_file());
    assert!(run_dir.join("summary.json").is_file());

    let output = binary()
        .args(["score", "--run-dir"])
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(stdout_of(&output).contains("mean performance 100.00%"));

    let output = binary().arg("report").arg(&run_dir).output().unwrap();
    assert!(output.status.success());
    let table = stdout_of(&output);
    assert!(table.contains("demo-model"));
    assert!(table.contains("standard"));

    let output = binary()
        .arg("report")
        .arg(&run_dir)
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert!(stdout_of(&output).starts_with("Model,Method,"));
}

#[test]
fn run_uses_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        serde_json::to_string_pretty(&["刑期：24个月", "刑期：42个月", "刑期：30个月"]).unwrap(),
    )
    .unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "method = \"cot\"\nmodel = \"from-config\"\ndataset = {:?}\nscript = {:?}\n",
            fixture("cases_small.jsonl"),
            script
        ),
    )
    .unwrap();
    let run_dir = dir.path().join("run");
    let output = binary()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run_dir)
        .args(["--model", "from-flag"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let manifest = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(
        manifest.contains("\"from-flag\""),
        "flag overrides config: {manifest}"
    );
    assert!(manifest.contains("\"cot\""));
}
