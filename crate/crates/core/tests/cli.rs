mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn bf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_benchforge")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(bf(&["--bogus", "ingest"]).status.code(), Some(2));
    assert_eq!(bf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bf(&["--help"]).status.code(), Some(0));
}

#[test]
fn pipeline_commands_need_a_config() {
    let out = bf(&["package"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = scratch("cli-bad-config");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "output = \"o\"\n[corpus]\nsources = [\"x\"]\n[filter]\ncc_min = 9\ncc_max = 2\n").unwrap();
    assert_eq!(bf(&["--config", s(&cfg), "--seed", "1", "filter"]).status.code(), Some(2));
    // No seed anywhere.
    std::fs::write(&cfg, "output = \"o\"\n[corpus]\nsources = [\"x\"]\n").unwrap();
    assert_eq!(bf(&["--config", s(&cfg), "filter"]).status.code(), Some(2));
}

#[test]
fn filter_command_runs_with_stub_judge_and_seed_override() {
    let dir = scratch("cli-filter");
    let cfg = dir.join("run.toml");
    let corpus = fixtures().join("corpus");
    std::fs::write(
        &cfg,
        format!("output = \"out\"\n[corpus]\nsources = [{:?}]\n[judge]\nprovider = \"http\"\n", s(&corpus)),
    )
    .unwrap();
    let out = bf(&["--config", s(&cfg), "--seed", "4", "--stub-judge", "filter"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = bf(&["report", s(&dir.join("out"))]);
    assert_eq!(report.status.code(), Some(0));
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("| judged suitable |"), "{text}");
}

#[test]
fn validate_instance_accepts_complete_and_rejects_broken() {
    let run = fixture_run();
    let id = &run.manifest.accepted[0];
    let good = run.out.join("instances").join(id);
    let ok = bf(&["validate-instance", s(&good)]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let broken = scratch("cli-broken-instance").join(id);
    std::fs::create_dir_all(&broken).unwrap();
    for f in ["instruction.md", "ground_truth.py", "manifest.json"] {
        std::fs::copy(good.join(f), broken.join(f)).unwrap();
    }
    let bad = bf(&["validate-instance", s(&broken)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("test_cases"));
}

#[test]
fn evaluate_writes_reports() {
    let run = fixture_run();
    let cands = scratch("cli-eval-candidates");
    let reports = scratch("cli-eval-reports");
    // Ground truth for every instance but one; the missing file is a
    // candidate failure, not an infrastructure failure.
    for id in run.manifest.accepted.iter().skip(1) {
        let gt = std::fs::read_to_string(run.out.join("instances").join(id).join("ground_truth.py")).unwrap();
        std::fs::write(cands.join(format!("{id}.py")), gt).unwrap();
    }
    let out = bf(&["evaluate", "--instances", s(&run.out.join("instances")), "--candidates", s(&cands), "--out", s(&reports)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(reports.join("report.json")).unwrap()).unwrap();
    let n = run.manifest.accepted.len() as f64;
    assert_eq!(json["instances"], run.manifest.accepted.len());
    assert!((json["pass_at_1"].as_f64().unwrap() - (n - 1.0) / n).abs() < 1e-12);
    assert!(reports.join("report.md").is_file());
}

#[test]
fn evaluate_on_missing_instances_dir_fails() {
    let out = bf(&["evaluate", "--instances", "/nonexistent/instances", "--candidates", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn documented_config_example_parses() {
    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/formats.md")).unwrap();
    let block = doc.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let dir = scratch("cli-doc-config");
    std::fs::write(dir.join("allow.txt"), "math\n").unwrap();
    let c = benchforge::orchestrator::PipelineConfig::from_toml(block, &dir).unwrap();
    c.validate().unwrap();
    assert_eq!(c.seed, Some(20240601));
    assert_eq!(c.cc_range().max, 10);
    assert!(c.corpus.window.is_some());
}
