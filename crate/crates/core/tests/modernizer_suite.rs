use std::fs;
use std::path::{Path, PathBuf};

use forge_core::detector::{analyze_source, Classification};
use forge_core::generator::gen_legacy;
use forge_core::modernizer::{modernize, modernize_batch, ModernizeError, Transform, TARGET_PRAGMA};
use forge_core::solidity::{call_sites, parse, CallKind, ContractScope};
use forge_core::taxonomy::{Label, Subtype};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/legacy")
}

fn fixtures() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "unsupported_loop.sol")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn generated(n: u64) -> Vec<(String, String, Label, Option<Subtype>)> {
    (0..n)
        .map(|i| {
            let (label, sub) = match i % 3 {
                0 => (Label::Vulnerable, Some(Subtype::SingleFunction)),
                1 => (Label::Vulnerable, Some(Subtype::CrossFunction)),
                _ => (Label::Secure, None),
            };
            (format!("gen{i}"), gen_legacy(1000 + i, label, sub).unwrap(), label, sub)
        })
        .collect()
}

/// Checks every post-condition of a successful modernization.
fn check_output(name: &str, input: &str) -> (Classification, Classification) {
    let r = modernize(input).unwrap_or_else(|e| panic!("{name}: {e}\n{input}"));
    let unit = parse(&r.source).unwrap_or_else(|e| panic!("{name}: output does not parse: {e}\n{}", r.source));
    assert_eq!(unit.pragma_req, TARGET_PRAGMA, "{name}");
    assert!(r.source.contains("pragma solidity ^0.8.19;"));
    assert!(r.transforms_applied.contains(&Transform::PragmaRewrite), "{name}");
    assert!(!r.source.contains(".transfer(") && !r.source.contains(".send("), "{name}:\n{}", r.source);
    assert!(!r.source.contains(".value(") && !r.source.contains("SafeMath"), "{name}:\n{}", r.source);
    for c in &unit.contracts {
        let scope = ContractScope::new(&unit, c);
        for f in c.functions() {
            for (_, call) in call_sites(&scope, f) {
                assert!(!matches!(call.callee_kind, CallKind::Transfer | CallKind::Send), "{name}: {call:?}");
            }
        }
    }
    let again = modernize(&r.source).unwrap();
    assert!(again.transforms_applied.is_empty(), "{name}: not idempotent: {:?}", again.transforms_applied);
    assert_eq!(again.source, r.source);
    (r.verdict_before, r.verdict_after)
}

#[test]
fn handwritten_fixtures_meet_postconditions() {
    for (name, src) in fixtures() {
        let (before, after) = check_output(&name, &src);
        if before != Classification::Inconclusive {
            assert_eq!(before, after, "{name}");
        }
    }
}

#[test]
fn handwritten_fixture_verdicts() {
    let expect = [
        ("cross_function_modifier.sol", Classification::Vulnerable),
        ("dao_style_withdraw.sol", Classification::Vulnerable),
        ("pragma_free.sol", Classification::Secure),
        ("safemath_mutex.sol", Classification::Secure),
        ("send_before_write.sol", Classification::Vulnerable),
        ("transfer_after_write.sol", Classification::Secure),
    ];
    let all = fixtures();
    for (name, want) in expect {
        let src = &all.iter().find(|(n, _)| n == name).unwrap().1;
        assert_eq!(analyze_source(src).unwrap().classification, want, "{name}");
        let out = modernize(src).unwrap().source;
        assert_eq!(analyze_source(&out).unwrap().classification, want, "{name} after");
    }
}

#[test]
fn expected_transforms_per_fixture() {
    let all = fixtures();
    let get = |n: &str| modernize(&all.iter().find(|(x, _)| x == n).unwrap().1).unwrap();
    let bank = get("old_constructor_bank.sol");
    for t in [Transform::ConstructorKeyword, Transform::FallbackKeyword, Transform::VisibilityAdded, Transform::CallOptions] {
        assert!(bank.transforms_applied.contains(&t), "{t:?}");
    }
    assert!(bank.source.contains("constructor() {"));
    assert!(bank.source.contains("fallback() external payable {"));
    let vault = get("safemath_mutex.sol");
    assert!(vault.transforms_applied.contains(&Transform::SafemathStripped));
    assert!(vault.source.contains("deposits[msg.sender] = deposits[msg.sender] + msg.value;"));
    assert!(!vault.source.contains("library"));
    let refund = get("send_before_write.sol");
    assert!(refund.transforms_applied.contains(&Transform::SendToCall));
    assert!(refund.source.contains("(bool success,) = msg.sender.call{value: owed}(\"\");\n        require(success);"));
    let wallet = get("transfer_after_write.sol");
    assert!(wallet.source.contains("mapping(address => uint) internal balances;"));
    assert!(wallet.source.contains("function balance() public view returns (uint)"));
    let shared = get("cross_function_modifier.sol");
    assert!(shared.source.contains("(bool success,) = msg.sender.call{value: amount}(\"\");"));
}

#[test]
fn opaque_transfer_is_flagged_not_altered() {
    let src = fs::read_to_string(fixture_dir().join("unsupported_loop.sol")).unwrap();
    match modernize(&src) {
        Err(ModernizeError::UnsupportedConstruct { context, .. }) => assert_eq!(context, "Payroll.payAll"),
        other => panic!("expected UnsupportedConstruct, got {other:?}"),
    }
}

#[test]
fn modern_reference_source_is_a_fixpoint() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for f in ["reentrancy_guard_template.sol", "single_function_template.sol"] {
        let src = fs::read_to_string(dir.join(f)).unwrap();
        let r = modernize(&src).unwrap();
        assert!(r.transforms_applied.is_empty(), "{f}");
        assert_eq!(r.source, src);
    }
}

#[test]
fn generated_legacy_set_preserves_labels() {
    for (name, src, label, sub) in generated(300) {
        let before = analyze_source(&src).unwrap();
        assert_eq!(before.classification.as_label(), Some(label), "{name}: {:?}\n{src}", before.findings);
        if let Some(s) = sub {
            assert_eq!(before.primary_subtype(), Some(s), "{name}\n{src}");
        }
        let (b, a) = check_output(&name, &src);
        assert_eq!(b, a, "{name}\n{src}");
    }
}

#[test]
fn batch_counts_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    let output = tmp.path().join("out");
    fs::create_dir_all(&input).unwrap();
    let (summary, _) = modernize_batch(&input, &output, None).unwrap();
    assert_eq!((summary.ok, summary.failed), (0, 0));

    let all = fixtures();
    fs::write(input.join("a.sol"), &all[0].1).unwrap();
    fs::write(input.join("b.sol"), &all[1].1).unwrap();
    fs::write(input.join("c.sol"), "contract Broken {").unwrap();
    fs::write(input.join("notes.txt"), "ignored").unwrap();
    let log = tmp.path().join("modernize.jsonl");
    let (summary, entries) = modernize_batch(&input, &output, Some(&log)).unwrap();
    assert_eq!((summary.ok, summary.failed), (2, 1));
    assert_eq!(entries.len(), 3);
    assert!(output.join("a.sol").exists() && output.join("b.sol").exists() && !output.join("c.sol").exists());
    let lines: Vec<serde_json::Value> =
        fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["file"], "c.sol");
    assert_eq!(lines[2]["status"], "error");
    assert_eq!(lines[0]["status"], "ok");
    assert!(lines[0]["transforms_applied"].as_array().unwrap().iter().any(|t| t == "pragma_rewrite"));
}

#[test]
fn batch_of_300_legacy_files() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir_all(&input).unwrap();
    let set = generated(300);
    for (name, src, _, _) in &set {
        fs::write(input.join(format!("{name}.sol")), src).unwrap();
    }
    let (summary, entries) = modernize_batch(&input, &tmp.path().join("out"), None).unwrap();
    assert_eq!((summary.ok, summary.failed), (300, 0));
    for e in entries {
        let i: usize = e.file.trim_start_matches("gen").trim_end_matches(".sol").parse().unwrap();
        if set[i].3 == Some(Subtype::SingleFunction) {
            assert!(matches!(e.outcome, forge_core::modernizer::BatchOutcome::Ok { label_preserved: true, .. }), "{}", e.file);
        }
    }
}
