//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use forge_core::balancer::{rebalance_subtypes, smote, FeatureVector};
use forge_core::corpus::{
    assemble_corpus, contract_path, AssembleConfig, CorpusManifest, ManifestRecord, ReviewStatus, Split, VerifiedBy,
};
use forge_core::detector::{analyze_source, Classification};
use forge_core::evaluator::{
    compare, confusion, metrics, parse_predictions, predictions_to_jsonl, realize_matrix, ComparisonInput, ConfusionMatrix,
    MetricsReport,
};
use forge_core::generator::{gen_legacy, generate, GenParams};
use forge_core::modernizer::{modernize, ModernizeError, TARGET_PRAGMA};
use forge_core::rng::{derive_seed, RandomStream, SplitMix64};
use forge_core::solidity::{call_sites, parse, CallKind, ContractScope};
use forge_core::taxonomy::{GenKind, Label, Provenance, SecurePattern, Subtype};

type Check = Result<String, String>;
type Family = (&'static str, Box<dyn Fn(u64) -> GenParams>);
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn test_manifest(vulnerable: usize, secure: usize) -> CorpusManifest {
    let record = |i: usize, label: Label| {
        let id = format!("{i:064x}");
        ManifestRecord {
            file: contract_path(Split::Test, &id),
            id,
            label,
            subtype: (label == Label::Vulnerable).then_some(Subtype::SingleFunction),
            provenance: Provenance::ModernizedReal,
            split: Split::Test,
            seed: i as u64,
            solidity_version: TARGET_PRAGMA.into(),
            verified_by: VerifiedBy::External,
            review_status: ReviewStatus::NeedsReview,
        }
    };
    let mut records: Vec<ManifestRecord> = (0..vulnerable).map(|i| record(i, Label::Vulnerable)).collect();
    records.extend((vulnerable..vulnerable + secure).map(|i| record(i, Label::Secure)));
    CorpusManifest::new(0, records)
}

/// Runs predictions realizing `target` through the text loader and back.
fn report_for(target: ConfusionMatrix) -> Result<MetricsReport, String> {
    let m = test_manifest(57, 63);
    let preds = realize_matrix(&m, &target).map_err(|e| e.to_string())?;
    let parsed = parse_predictions(&predictions_to_jsonl(&preds), &m).map_err(|e| e.to_string())?;
    let matrix = confusion(&m, &parsed);
    ensure(matrix == target, || format!("matrix {matrix:?} != {target:?}"))?;
    Ok(metrics(&matrix))
}

fn check_table(r: &MetricsReport, expect: [[f64; 3]; 3], accuracy: f64) -> Result<(), String> {
    let s = r.class(Label::Secure);
    let v = r.class(Label::Vulnerable);
    let w = r.weighted;
    let got = [[s.precision, s.recall, s.f1], [v.precision, v.recall, v.f1], [w.precision, w.recall, w.f1]];
    for (row, name) in ["secure", "vulnerable", "weighted"].iter().enumerate() {
        for col in 0..3 {
            let (g, e) = (got[row][col], expect[row][col]);
            ensure((g - e).abs() <= 0.005, || format!("{name}[{col}] = {g:.4}, expected {e:.2}"))?;
        }
    }
    ensure((r.accuracy - accuracy).abs() <= 0.005, || format!("accuracy {:.4}, expected {accuracy}", r.accuracy))
}

fn llama_metrics() -> Check {
    let start = Instant::now();
    let r = report_for(ConfusionMatrix {
        tp: 15,
        fp: 4,
        tn: 47,
        fn_: 26,
        abstained: 28,
    })?;
    check_table(&r, [[0.64, 0.92, 0.76], [0.79, 0.37, 0.50], [0.71, 0.67, 0.64]], 0.6739)?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("accuracy {:.4}, weighted f1 {:.2}, {elapsed:?}", r.accuracy, r.weighted.f1))
}

fn qwen_metrics() -> Check {
    let r = report_for(ConfusionMatrix {
        tp: 39,
        fp: 31,
        tn: 32,
        fn_: 18,
        abstained: 0,
    })?;
    check_table(&r, [[0.64, 0.51, 0.57], [0.56, 0.68, 0.61], [0.60, 0.59, 0.59]], 0.5917)?;
    Ok(format!("accuracy {:.4}, weighted f1 {:.2}", r.accuracy, r.weighted.f1))
}

fn comparison_table() -> Check {
    let mut llama = report_for(ConfusionMatrix {
        tp: 15,
        fp: 4,
        tn: 47,
        fn_: 26,
        abstained: 28,
    })?;
    llama.name = Some("llama-3.2-3b".into());
    let deepseek: ComparisonInput = serde_json::from_str(r#"{"name": "deepseek-r1-14b", "accuracy": 0.7043, "skipped": 5}"#)
        .map_err(|e| e.to_string())?;
    let rows = compare(&[ComparisonInput::from_report("llama", &llama), deepseek]).map_err(|e| e.to_string())?;
    let shown: Vec<(String, String, usize)> = rows.iter().map(|r| (r.name.clone(), format!("{:.2}", r.accuracy), r.skipped)).collect();
    let expected = vec![
        ("deepseek-r1-14b".to_string(), "70.43".to_string(), 5),
        ("llama-3.2-3b".to_string(), "67.39".to_string(), 28),
    ];
    ensure(shown == expected, || format!("{shown:?}"))?;
    Ok("70.43% / 5 skipped, 67.39% / 28 skipped".into())
}

fn corpus_census() -> Check {
    let start = Instant::now();
    let cfg = AssembleConfig::new(42);
    let a = assemble_corpus(&cfg).map_err(|e| e.to_string())?;
    let m = &a.manifest;
    let count = |label: Label, provenance: Option<Provenance>, split: Split| {
        m.count_where(|r| r.label == label && provenance.is_none_or(|p| r.provenance == p) && r.split == split)
    };
    use Label::*;
    use Provenance::*;
    let expected = [
        ("train vulnerable synthetic_basic", count(Vulnerable, Some(SyntheticBasic), Split::Train), 2800),
        ("train vulnerable synthetic_advanced", count(Vulnerable, Some(SyntheticAdvanced), Split::Train), 900),
        ("train vulnerable modernized_real", count(Vulnerable, Some(ModernizedReal), Split::Train), 300),
        ("train secure synthetic_basic", count(Secure, Some(SyntheticBasic), Split::Train), 2800),
        ("train secure synthetic_advanced", count(Secure, Some(SyntheticAdvanced), Split::Train), 800),
        ("train secure modernized_real", count(Secure, Some(ModernizedReal), Split::Train), 400),
        ("test vulnerable modernized_real", count(Vulnerable, Some(ModernizedReal), Split::Test), 44),
        ("test vulnerable real_exploit", count(Vulnerable, Some(RealExploit), Split::Test), 13),
        ("test secure", count(Secure, None, Split::Test), 63),
        ("train", m.split(Split::Train).count(), 8000),
        ("test", m.split(Split::Test).count(), 120),
    ];
    for (what, got, want) in expected {
        ensure(got == want, || format!("{what}: {got} != {want}"))?;
    }
    let again = assemble_corpus(&cfg).map_err(|e| e.to_string())?;
    ensure(again.manifest.hash() == m.hash(), || "rerun changed the manifest hash".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("8000 + 120 records, sha256 {}…, two assemblies in {elapsed:.1?}", &m.hash()[..12]))
}

fn fixture(rel: &str) -> Result<String, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel);
    fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn generator_detector_consistency() -> Check {
    const N: u64 = 250;
    let cases: Vec<Family> = vec![
        ("vuln_basic", Box::new(|s| GenParams::sampled(GenKind::VulnBasic, s))),
        (
            "vuln_advanced/single_function",
            Box::new(|s| GenParams::sampled(GenKind::VulnAdvanced, s).with_subtype(Subtype::SingleFunction)),
        ),
        (
            "vuln_advanced/cross_function",
            Box::new(|s| GenParams::sampled(GenKind::VulnAdvanced, s).with_subtype(Subtype::CrossFunction)),
        ),
        (
            "secure_basic",
            Box::new(|s| {
                GenParams::sampled(GenKind::SecureBasic, s).with_pattern(SecurePattern::ALL[(s % 4) as usize])
            }),
        ),
    ];
    for (name, make) in &cases {
        for i in 0..N {
            let p = make(derive_seed(0xacce_5700, i));
            let g = generate(&p).map_err(|e| format!("{name} #{i}: {e}"))?;
            let v = analyze_source(&g.source).map_err(|e| format!("{name} #{i}: {e}"))?;
            ensure(v.classification.as_label() == Some(g.label), || {
                format!("{name} #{i}: label {} but verdict {:?}", g.label, v.classification)
            })?;
        }
    }
    let fig1 = analyze_source(&fixture("single_function_template.sol")?).map_err(|e| e.to_string())?;
    ensure(fig1.classification == Classification::Vulnerable, || format!("single-function template: {:?}", fig1.classification))?;
    let fig2 = analyze_source(&fixture("reentrancy_guard_template.sol")?).map_err(|e| e.to_string())?;
    ensure(fig2.classification == Classification::Secure, || format!("guard template: {:?}", fig2.classification))?;
    Ok(format!("{} samples per family agree; reference templates vulnerable / secure", N))
}

fn modernized_ok(name: &str, input: &str) -> Result<(Classification, Classification), String> {
    let r = modernize(input).map_err(|e| format!("{name}: {e}"))?;
    let unit = parse(&r.source).map_err(|e| format!("{name}: output does not parse: {e}"))?;
    ensure(unit.pragma_req == TARGET_PRAGMA, || format!("{name}: pragma {}", unit.pragma_req))?;
    ensure(!r.source.contains(".transfer(") && !r.source.contains(".send("), || format!("{name}: transfer/send remains"))?;
    for c in &unit.contracts {
        let scope = ContractScope::new(&unit, c);
        for f in c.functions() {
            for (_, call) in call_sites(&scope, f) {
                ensure(!matches!(call.callee_kind, CallKind::Transfer | CallKind::Send), || {
                    format!("{name}: {:?} call in {}", call.callee_kind, f.name)
                })?;
            }
        }
    }
    let again = modernize(&r.source).map_err(|e| format!("{name}: second pass: {e}"))?;
    ensure(again.transforms_applied.is_empty() && again.source == r.source, || format!("{name}: not idempotent"))?;
    Ok((r.verdict_before, r.verdict_after))
}

fn modernizer_suite() -> Check {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/legacy");
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    files.sort();
    let mut inputs = Vec::new();
    for p in &files {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        inputs.push((name, fs::read_to_string(p).map_err(|e| e.to_string())?));
    }
    for i in 0..200u64 {
        let (label, sub) = match i % 3 {
            0 => (Label::Vulnerable, Some(Subtype::SingleFunction)),
            1 => (Label::Vulnerable, Some(Subtype::CrossFunction)),
            _ => (Label::Secure, None),
        };
        inputs.push((format!("legacy#{i}"), gen_legacy(derive_seed(0x1e9a_c700, i), label, sub).map_err(|e| e.to_string())?));
    }
    let (mut ok, mut decidable, mut flagged) = (0, 0, 0);
    for (name, src) in &inputs {
        match modernize(src) {
            Err(ModernizeError::UnsupportedConstruct { .. }) if name == "unsupported_loop.sol" => flagged += 1,
            _ => {
                let (before, after) = modernized_ok(name, src)?;
                ok += 1;
                if before != Classification::Inconclusive {
                    decidable += 1;
                    ensure(before == after, || format!("{name}: verdict {before:?} became {after:?}"))?;
                }
            }
        }
    }
    ensure(flagged == 1, || "unsupported fixture was not flagged".into())?;
    Ok(format!("{ok} outputs meet every postcondition, {decidable}/{decidable} decidable verdicts preserved, 1 unsupported flagged"))
}

fn brute_force_nearest(points: &[[f64; 2]], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

fn on_segment(p: &[f64], a: [f64; 2], b: [f64; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2 };
    if !(-1e-9..=1.0 + 1e-9).contains(&t) {
        return false;
    }
    (a[0] + t * dx - p[0]).abs() <= 1e-9 && (a[1] + t * dy - p[1]).abs() <= 1e-9
}

fn smote_properties() -> Check {
    let mut rng = SplitMix64::new(0x5307e);
    let points: Vec<[f64; 2]> = (0..20).map(|_| [rng.next_f64() * 10.0, rng.next_f64() * 10.0]).collect();
    let minority: Vec<FeatureVector> = points
        .iter()
        .map(|p| FeatureVector {
            values: p.to_vec(),
            origin: None,
        })
        .collect();
    let synthetic = smote(&minority, 2, 200, &mut SplitMix64::new(7)).map_err(|e| e.to_string())?;
    for (n, s) in synthetic.iter().enumerate() {
        let hit = (0..points.len())
            .any(|i| brute_force_nearest(&points, i, 2).into_iter().any(|j| on_segment(&s.values, points[i], points[j])));
        ensure(hit, || format!("synthetic #{n} {:?} is on no nearest-neighbor segment", s.values))?;
    }
    let counts: BTreeMap<Subtype, usize> = Subtype::ALL.iter().copied().zip([100, 300, 250, 250]).collect();
    let deltas = rebalance_subtypes(&counts, 900);
    for (s, c) in &counts {
        let after = *c as i64 + deltas[s];
        ensure(after == 225, || format!("{s}: {after} after rebalance"))?;
    }
    Ok(format!("{} synthetics on brute-force kNN segments; {{100,300,250,250}} -> 225 each", synthetic.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("metrics reconstruction, abstaining model", llama_metrics),
        ("metrics reconstruction, full-coverage model", qwen_metrics),
        ("comparison table", comparison_table),
        ("corpus census and hash determinism", corpus_census),
        ("generator-detector consistency", generator_detector_consistency),
        ("modernizer suite", modernizer_suite),
        ("SMOTE properties", smote_properties),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", 7 - failed, 7);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
