use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use forge_core::corpus::{
    assemble_corpus, contract_path, stratified_split, verify_corpus, write_corpus, Agreement, AssembleConfig, CorpusError,
    CorpusManifest, ManifestRecord, ReviewStatus, Split, Strictness, TestSpec, TrainSpec, VerifiedBy, MANIFEST_FILE,
};
use forge_core::generator::{generate, gen_legacy, GenParams};
use forge_core::rng::{RandomStream, SplitMix64};
use forge_core::taxonomy::{GenKind, Label, Provenance, Subtype};
use proptest::prelude::*;

fn small_config(seed: u64) -> AssembleConfig {
    let mut cfg = AssembleConfig::new(seed);
    cfg.train = TrainSpec {
        vuln_basic: 20,
        vuln_advanced: 60,
        vuln_external: 4,
        secure_basic: 20,
        secure_advanced: 8,
        secure_external: 4,
    };
    cfg.test = TestSpec {
        study_vulnerable: 4,
        exploits: 4,
        secure: 6,
    };
    cfg.smote_k = 2;
    cfg
}

fn count(m: &CorpusManifest, label: Label, provenance: Provenance, split: Split) -> usize {
    m.count_where(|r| r.label == label && r.provenance == provenance && r.split == split)
}

#[test]
fn default_census() {
    let a = assemble_corpus(&AssembleConfig::new(42)).unwrap();
    let m = &a.manifest;
    assert_eq!(m.split(Split::Train).count(), 8000);
    assert_eq!(m.split(Split::Test).count(), 120);

    use Label::*;
    use Provenance::*;
    assert_eq!(count(m, Vulnerable, SyntheticBasic, Split::Train), 2800);
    assert_eq!(count(m, Vulnerable, SyntheticAdvanced, Split::Train), 900);
    assert_eq!(count(m, Vulnerable, ModernizedReal, Split::Train), 300);
    assert_eq!(count(m, Secure, SyntheticBasic, Split::Train), 2800);
    assert_eq!(count(m, Secure, SyntheticAdvanced, Split::Train), 800);
    assert_eq!(count(m, Secure, ModernizedReal, Split::Train), 400);
    assert_eq!(m.count_where(|r| r.split == Split::Test && r.label == Vulnerable), 57);
    assert_eq!(m.count_where(|r| r.split == Split::Test && r.label == Secure), 63);
    assert_eq!(count(m, Vulnerable, RealExploit, Split::Test), 13);

    for &s in Subtype::ALL {
        let n = m.count_where(|r| r.provenance == SyntheticAdvanced && r.label == Vulnerable && r.subtype == Some(s));
        assert_eq!(n, 225, "{s}");
    }
    let test_subtypes: BTreeSet<Subtype> = m.split(Split::Test).filter_map(|r| r.subtype).collect();
    assert_eq!(test_subtypes.len(), 4);

    // No external directories were given, so every external slot is a stand-in.
    assert_eq!(m.count_where(|r| r.review_status == ReviewStatus::NeedsReview), 300 + 400 + 120);
    assert!(!a.warnings.is_empty());

    let ids: BTreeSet<&str> = m.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), m.records.len());
    let unique_sources: BTreeSet<&str> = a.sources.iter().map(String::as_str).collect();
    assert_eq!(unique_sources.len(), a.sources.len());
    for r in &m.records {
        assert_eq!(r.file, contract_path(r.split, &r.id));
        assert_eq!(r.label == Secure, r.subtype.is_none(), "{}", r.id);
    }
}

#[test]
fn same_seed_same_hash() {
    let a = assemble_corpus(&small_config(9)).unwrap();
    let b = assemble_corpus(&small_config(9)).unwrap();
    assert_eq!(a.manifest.hash(), b.manifest.hash());
    assert_eq!(a.sources, b.sources);
    let c = assemble_corpus(&small_config(10)).unwrap();
    assert_ne!(a.manifest.hash(), c.manifest.hash());
}

#[test]
fn manifest_round_trip_and_hash_matches_file() {
    let a = assemble_corpus(&small_config(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &a.manifest, &a.sources).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let back = CorpusManifest::read(&path).unwrap();
    assert_eq!(back, a.manifest);

    let bytes = fs::read(&path).unwrap();
    use sha2::{Digest, Sha256};
    assert_eq!(hex::encode(Sha256::digest(&bytes)), a.manifest.hash());

    for r in &a.manifest.records {
        assert!(dir.path().join(&r.file).is_file());
    }
}

#[test]
fn tampered_manifest_fails_meta_check() {
    let a = assemble_corpus(&small_config(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &a.manifest, &a.sources).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let first_line_end = text.find('\n').unwrap();
    fs::write(&path, &text[first_line_end + 1..]).unwrap();
    assert!(matches!(CorpusManifest::read(&path), Err(CorpusError::MetaMismatch(_))));
}

#[test]
fn malformed_line_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let good = ManifestRecord {
        id: "a".into(),
        file: contract_path(Split::Train, "a"),
        label: Label::Secure,
        subtype: None,
        provenance: Provenance::SyntheticBasic,
        split: Split::Train,
        seed: 1,
        solidity_version: "^0.8.19".into(),
        verified_by: VerifiedBy::Generator,
        review_status: ReviewStatus::Unreviewed,
    };
    let text = format!("{}\n{{\"id\": \"b\", \"bogus\": 1}}\n", serde_json::to_string(&good).unwrap());
    fs::write(&path, text).unwrap();
    match CorpusManifest::read(&path) {
        Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn too_few_minority_samples_for_smote() {
    let mut cfg = small_config(5);
    cfg.train.vuln_advanced = 8;
    cfg.smote_k = 5;
    assert!(matches!(assemble_corpus(&cfg), Err(CorpusError::Balance(_))));
}

#[test]
fn shortfall_without_standins() {
    let mut cfg = small_config(5);
    cfg.allow_standins = false;
    match assemble_corpus(&cfg) {
        Err(CorpusError::Shortfall { needed, found, .. }) => {
            assert_eq!(needed, 4);
            assert_eq!(found, 0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn external_directories_are_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let vuln = dir.path().join("vuln");
    let exploits = dir.path().join("exploits");
    fs::create_dir_all(&vuln).unwrap();
    fs::create_dir_all(&exploits).unwrap();
    for i in 0..4u64 {
        let src = gen_legacy(1000 + i, Label::Vulnerable, Some(Subtype::SingleFunction)).unwrap();
        fs::write(vuln.join(format!("v{i}.sol")), src).unwrap();
    }
    fs::write(vuln.join("broken.sol"), "contract {").unwrap();
    for i in 0..4u64 {
        let p = GenParams::sampled(GenKind::VulnAdvanced, 2000 + i).with_subtype(Subtype::CrossContract);
        fs::write(exploits.join(format!("e{i}.sol")), generate(&p).unwrap().source).unwrap();
    }

    let mut cfg = small_config(6);
    cfg.external_vuln_dir = Some(vuln);
    cfg.exploit_dir = Some(exploits);
    let a = assemble_corpus(&cfg).unwrap();
    let m = &a.manifest;
    let ingested = m.count_where(|r| r.provenance == Provenance::ModernizedReal && r.label == Label::Vulnerable && r.split == Split::Train);
    assert_eq!(ingested, 4);
    assert!(m
        .records
        .iter()
        .filter(|r| r.provenance == Provenance::ModernizedReal && r.label == Label::Vulnerable && r.split == Split::Train)
        .all(|r| r.review_status == ReviewStatus::Unreviewed));
    let exploit_records: Vec<_> = m.records.iter().filter(|r| r.provenance == Provenance::RealExploit).collect();
    assert_eq!(exploit_records.len(), 4);
    assert!(exploit_records.iter().all(|r| r.split == Split::Test && r.review_status == ReviewStatus::Unreviewed));
    assert!(a.warnings.iter().any(|w| w.contains("broken.sol")));
    // The modernized sources carry the target pragma.
    for (r, src) in m.records.iter().zip(&a.sources) {
        if r.provenance == Provenance::ModernizedReal {
            assert!(src.contains("pragma solidity ^0.8.19;"), "{}", r.id);
        }
    }
}

#[test]
fn verify_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let report = verify_corpus(&CorpusManifest::new(0, Vec::new()), dir.path(), Strictness::Strict);
    assert!(report.passed());
    assert_eq!(report.summary.total, 0);
}

#[test]
fn verify_synthetic_corpus_agrees() {
    let mut cfg = small_config(7);
    cfg.train.vuln_external = 0;
    cfg.train.secure_external = 0;
    cfg.train.secure_advanced = 0;
    cfg.train.vuln_advanced = 0;
    cfg.test = TestSpec {
        study_vulnerable: 0,
        exploits: 0,
        secure: 0,
    };
    let a = assemble_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &a.manifest, &a.sources).unwrap();
    let report = verify_corpus(&a.manifest, dir.path(), Strictness::Strict);
    assert_eq!(report.summary.total, 40);
    assert_eq!(report.summary.agree, 40, "{:?}", report.summary);
    assert!(report.passed());
}

#[test]
fn verify_flags_missing_and_mislabeled_files() {
    let a = assemble_corpus(&small_config(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &a.manifest, &a.sources).unwrap();
    let mut m = a.manifest.clone();
    let victim = m.records.iter().position(|r| r.provenance == Provenance::SyntheticBasic).unwrap();
    fs::remove_file(dir.path().join(&m.records[victim].file)).unwrap();
    let flipped = m
        .records
        .iter()
        .position(|r| r.provenance == Provenance::SyntheticBasic && r.label == Label::Secure)
        .unwrap();
    m.records[flipped].label = Label::Vulnerable;

    let report = verify_corpus(&m, dir.path(), Strictness::Permissive);
    assert!(!report.passed());
    assert_eq!(report.entries[victim].agreement, Agreement::Error);
    assert!(report.entries[victim].fatal);
    assert_eq!(report.entries[flipped].agreement, Agreement::Disagree);
    assert!(report.entries[flipped].fatal);
    assert_eq!(report.summary.errors, 1);
}

#[test]
fn permissive_tolerates_undecidable_disagreement() {
    let a = assemble_corpus(&AssembleConfig {
        train: TrainSpec {
            vuln_basic: 0,
            vuln_advanced: 0,
            vuln_external: 0,
            secure_basic: 0,
            secure_advanced: 30,
            secure_external: 0,
        },
        test: TestSpec {
            study_vulnerable: 0,
            exploits: 8,
            secure: 0,
        },
        ..AssembleConfig::new(11)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &a.manifest, &a.sources).unwrap();
    let report = verify_corpus(&a.manifest, dir.path(), Strictness::Permissive);
    assert!(report.passed(), "{:?}", report.summary);
    assert_eq!(report.summary.errors, 0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key(u8, u8);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_split_is_proportional(seed in any::<u64>(), n in 0usize..1000, frac in 0.05f64..0.95) {
        let mut rng = SplitMix64::new(seed);
        let items: Vec<Key> = (0..n).map(|_| Key(rng.below(2) as u8, rng.below(5) as u8)).collect();
        let fractions = [frac, 1.0 - frac];
        let assigned = stratified_split(&items, |k| *k, &fractions, seed).unwrap();
        prop_assert_eq!(assigned.len(), n);

        let mut strata: BTreeMap<Key, [usize; 2]> = BTreeMap::new();
        for (k, s) in items.iter().zip(&assigned) {
            strata.entry(*k).or_default()[*s] += 1;
        }
        for counts in strata.values() {
            let size = (counts[0] + counts[1]) as f64;
            for (s, f) in fractions.iter().enumerate() {
                prop_assert!((counts[s] as f64 - f * size).abs() <= 1.0, "{:?} {:?}", counts, fractions);
            }
        }
        prop_assert_eq!(stratified_split(&items, |k| *k, &fractions, seed).unwrap(), assigned);
    }
}
