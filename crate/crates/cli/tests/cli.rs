use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn forge() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_forge"));
    c.env_remove("FORGE_SEED");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    forge().args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn manifest_lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generate_writes_count_files_and_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["generate", "--kind", "vuln_advanced", "--subtype", "read_only", "--count", "5", "--seed", "7", "--out", "d/"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let records = manifest_lines(&dir.path().join("d/manifest.jsonl"));
    assert_eq!(records.len(), 5);
    for r in &records {
        assert_eq!(r["subtype"], "read_only");
        assert_eq!(r["label"], "vulnerable");
        assert_eq!(r["provenance"], "synthetic_advanced");
        assert!(dir.path().join("d").join(r["file"].as_str().unwrap()).is_file());
    }
    let files = fs::read_dir(dir.path().join("d/train/contracts")).unwrap().count();
    assert_eq!(files, 5);
}

#[test]
fn eval_without_manifest_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eval", "--predictions", "p.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--manifest"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["generate", "--kind", "nope", "--out", "x"], dir.path()).status.code(), Some(2));
    let o = run(&["generate", "--kind", "secure_basic", "--subtype", "read_only", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["compare"], dir.path()).status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["--seed", "11", "generate", "--kind", "vuln_basic", "--count", "3", "--out", "a"], dir.path());
    assert!(a.status.success());
    let b = forge()
        .args(["generate", "--kind", "vuln_basic", "--count", "3", "--out", "b"])
        .env("FORGE_SEED", "11")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(b.status.success());
    assert!(stderr(&b).contains("--seed 11"));
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("manifest.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn effective_config_line_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--seed", "5", "generate", "--kind", "secure_basic", "--count", "4", "--out", "first"], dir.path());
    assert!(o.status.success());
    let line = stderr(&o).lines().find_map(|l| l.strip_prefix("[info] effective config: ").map(str::to_string)).unwrap();
    let args: Vec<String> = line.split_whitespace().skip(1).map(|s| if s == "first" { "second".into() } else { s.into() }).collect();
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(run(&args, dir.path()).status.success());
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("manifest.jsonl")).unwrap();
    assert_eq!(read("first"), read("second"));
}

#[test]
fn json_log_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--log-format", "json", "generate", "--kind", "vuln_basic", "--out", "x"], dir.path());
    assert!(o.status.success());
    for line in stderr(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["level"].is_string() && v["message"].is_string());
    }
}

#[test]
fn verify_fails_on_mislabeled_record() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["generate", "--kind", "vuln_basic", "--count", "3", "--out", "g"], dir.path()).status.success());
    let ok = run(&["verify", "--manifest", "g/manifest.jsonl", "--strict"], dir.path());
    assert!(ok.status.success(), "{}", stderr(&ok));
    let lines: Vec<serde_json::Value> = String::from_utf8(ok.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l["agreement"] == "agree"));

    let path = dir.path().join("g/manifest.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let flipped = text.replacen("\"label\":\"vulnerable\"", "\"label\":\"secure\"", 1);
    fs::write(&path, flipped).unwrap();
    fs::remove_file(dir.path().join("g/manifest.meta.json")).unwrap();
    let bad = run(&["verify", "--manifest", "g/manifest.jsonl"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn assemble_without_standins_reports_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["assemble", "--allow-standins", "false", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("shortfall"));
}

#[test]
fn assemble_with_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("train.json"),
        r#"{"vuln_basic": 6, "vuln_advanced": 40, "vuln_external": 2, "secure_basic": 8, "secure_advanced": 4, "secure_external": 2}"#,
    )
    .unwrap();
    fs::write(dir.path().join("test.json"), r#"{"study_vulnerable": 2, "exploits": 2, "secure": 3}"#).unwrap();
    let o = run(
        &["--seed", "3", "assemble", "--train-spec", "train.json", "--test-spec", "test.json", "--smote-k", "2", "--out", "c"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("STAND-INS ENABLED"));
    assert_eq!(manifest_lines(&dir.path().join("c/manifest.jsonl")).len(), 62 + 7);

    fs::write(dir.path().join("bad.json"), r#"{"vuln_basics": 1}"#).unwrap();
    let o = run(&["assemble", "--train-spec", "bad.json", "--out", "c2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn modernize_directory_with_log() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir_all(&input).unwrap();
    fs::write(
        input.join("bank.sol"),
        "pragma solidity ^0.4.24;\ncontract Bank {\n    mapping(address => uint) balances;\n    function withdraw() {\n        uint amount = balances[msg.sender];\n        msg.sender.transfer(amount);\n        balances[msg.sender] = 0;\n    }\n}\n",
    )
    .unwrap();
    fs::write(input.join("broken.sol"), "contract {").unwrap();
    let o = run(&["modernize", "--in", "in", "--out", "out", "--log", "modernize.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = fs::read_to_string(dir.path().join("out/bank.sol")).unwrap();
    assert!(out.contains("pragma solidity ^0.8.19;"));
    assert!(!out.contains(".transfer("));
    let log = manifest_lines(&dir.path().join("modernize.jsonl"));
    assert_eq!(log.len(), 2);
    assert!(log.iter().any(|l| l["status"] == "error"));
}

#[test]
fn full_pipeline_scores_sample_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    let predictions = root.join("data/sample_predictions.jsonl");
    let supplied = root.join("data/reports/deepseek-r1-14b.json");

    let o = run(&["--seed", "42", "assemble", "--out", "corpus"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["verify", "--manifest", "corpus/manifest.jsonl", "--report", "verify.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(
        &[
            "eval",
            "--manifest",
            "corpus/manifest.jsonl",
            "--predictions",
            predictions.to_str().unwrap(),
            "--name",
            "llama-3.2-3b",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let m = &report["matrix"];
    assert_eq!((m["tn"].as_u64(), m["fp"].as_u64(), m["fn"].as_u64(), m["tp"].as_u64()), (Some(47), Some(4), Some(26), Some(15)));
    assert_eq!(m["abstained"], 28);
    let get = |v: &serde_json::Value| v.as_f64().unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 0.005;
    let s = &report["per_class"]["secure"];
    let v = &report["per_class"]["vulnerable"];
    let w = &report["weighted"];
    assert!(close(get(&s["precision"]), 0.64) && close(get(&s["recall"]), 0.92) && close(get(&s["f1"]), 0.76));
    assert!(close(get(&v["precision"]), 0.79) && close(get(&v["recall"]), 0.37) && close(get(&v["f1"]), 0.50));
    assert!(close(get(&w["precision"]), 0.71) && close(get(&w["recall"]), 0.67) && close(get(&w["f1"]), 0.64));
    assert!((get(&report["accuracy"]) - 0.6739).abs() < 0.00005);

    let o = run(&["compare", "report.json", supplied.to_str().unwrap(), "--out", "rows.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[1].starts_with("deepseek-r1-14b") && lines[1].contains("70.43%") && lines[1].contains(" 5 "));
    assert!(lines[2].starts_with("llama-3.2-3b") && lines[2].contains("67.39%") && lines[2].contains(" 28 "));
}
