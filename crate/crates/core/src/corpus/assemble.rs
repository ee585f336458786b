use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{contract_path, io_err, CorpusError, CorpusManifest, ManifestRecord, ReviewStatus, Split, VerifiedBy};
use crate::balancer::{defeaturize, featurize, rebalance_subtypes, smote, DEFAULT_K};
use crate::detector::{self, Verdict};
use crate::generator::{content_id, gen_legacy, generate, GenParams};
use crate::modernizer::modernize;
use crate::rng::{derive_seed, SplitMix64};
use crate::solidity;
use crate::taxonomy::{GenKind, Label, Provenance, SecurePattern, Subtype};

/// Reseeding attempts before a block gives up on finding an unseen source.
const MAX_RESEEDS: u64 = 64;

/// Training composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub vuln_basic: usize,
    pub vuln_advanced: usize,
    pub vuln_external: usize,
    pub secure_basic: usize,
    pub secure_advanced: usize,
    pub secure_external: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            vuln_basic: 2800,
            vuln_advanced: 900,
            vuln_external: 300,
            secure_basic: 2800,
            secure_advanced: 800,
            secure_external: 400,
        }
    }
}

impl TrainSpec {
    pub fn total(&self) -> usize {
        self.vuln_basic + self.vuln_advanced + self.vuln_external + self.secure_basic + self.secure_advanced + self.secure_external
    }
}

/// Test composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSpec {
    pub study_vulnerable: usize,
    pub exploits: usize,
    pub secure: usize,
}

impl Default for TestSpec {
    fn default() -> Self {
        Self {
            study_vulnerable: 44,
            exploits: 13,
            secure: 63,
        }
    }
}

impl TestSpec {
    pub fn total(&self) -> usize {
        self.study_vulnerable + self.exploits + self.secure
    }
}

#[derive(Debug, Clone)]
pub struct AssembleConfig {
    pub seed: u64,
    pub train: TrainSpec,
    pub test: TestSpec,
    /// Legacy vulnerable contracts to modernize for training.
    pub external_vuln_dir: Option<PathBuf>,
    /// Legacy secure contracts to modernize for training.
    pub external_secure_dir: Option<PathBuf>,
    /// Study dataset for testing, with `vulnerable/` and `secure/` subdirectories.
    pub study_dir: Option<PathBuf>,
    /// Contracts derived from real exploits (all vulnerable).
    pub exploit_dir: Option<PathBuf>,
    pub allow_standins: bool,
    pub smote_k: usize,
}

impl AssembleConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            train: TrainSpec::default(),
            test: TestSpec::default(),
            external_vuln_dir: None,
            external_secure_dir: None,
            study_dir: None,
            exploit_dir: None,
            allow_standins: true,
            smote_k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub manifest: CorpusManifest,
    /// Sources parallel to `manifest.records`.
    pub sources: Vec<String>,
    pub warnings: Vec<String>,
}

/// Stream tags for each block of the corpus.
#[derive(Debug, Clone, Copy)]
enum Block {
    VulnBasic = 1,
    VulnAdvanced,
    VulnAdvancedSmote,
    VulnExternal,
    SecureBasic,
    SecureAdvanced,
    SecureExternal,
    StudyVulnerable,
    StudySecure,
    Exploit,
}

fn block_seed(master: u64, block: Block) -> u64 {
    derive_seed(master, 0x626c_6f63_6b00 | block as u64)
}

struct Candidate {
    source: String,
    label: Label,
    subtype: Option<Subtype>,
    provenance: Provenance,
    seed: u64,
    verified_by: VerifiedBy,
    review_status: ReviewStatus,
}

struct Builder<'a> {
    split: Split,
    seen: &'a mut BTreeSet<String>,
    records: Vec<ManifestRecord>,
    sources: Vec<String>,
    warnings: Vec<String>,
}

impl Builder<'_> {
    /// Adds the candidate unless its source is already in the corpus.
    fn push(&mut self, c: Candidate) -> bool {
        let id = content_id(&c.source);
        if !self.seen.insert(id.clone()) {
            return false;
        }
        let solidity_version = solidity::parse(&c.source).map(|u| u.pragma_req).unwrap_or_default();
        self.records.push(ManifestRecord {
            file: contract_path(self.split, &id),
            id,
            label: c.label,
            subtype: c.subtype,
            provenance: c.provenance,
            split: self.split,
            seed: c.seed,
            solidity_version,
            verified_by: c.verified_by,
            review_status: c.review_status,
        });
        self.sources.push(c.source);
        true
    }

    fn seen(&self, source: &str) -> bool {
        self.seen.contains(&content_id(source))
    }
}

fn agrees(verdict: &Verdict, label: Label) -> bool {
    verdict.classification.as_label() == Some(label)
}

/// Generates one contract per parameter set, reseeding on duplicates.
fn synthetic_block(b: &mut Builder<'_>, params: Vec<GenParams>) -> Result<(), CorpusError> {
    let produced: Vec<Result<(String, Verdict), CorpusError>> = params
        .par_iter()
        .map(|p| {
            let g = generate(p)?;
            let v = detector::analyze_source(&g.source).map_err(crate::generator::GenError::from)?;
            Ok((g.source, v))
        })
        .collect();
    for (p, out) in params.into_iter().zip(produced) {
        let (mut source, mut verdict) = out?;
        let mut used = p.clone();
        let mut attempt = 0;
        while b.seen(&source) {
            attempt += 1;
            if attempt > MAX_RESEEDS {
                return Err(CorpusError::Exhausted(format!("{} seed {}", p.kind, p.seed)));
            }
            used.seed = derive_seed(p.seed, attempt);
            source = generate(&used)?.source;
            verdict = detector::analyze_source(&source).map_err(crate::generator::GenError::from)?;
        }
        let label = used.label();
        let ok = agrees(&verdict, label);
        b.push(Candidate {
            source,
            label,
            subtype: used.effective_subtype(),
            provenance: used.kind.provenance(),
            seed: used.seed,
            verified_by: if ok { VerifiedBy::Both } else { VerifiedBy::Generator },
            review_status: if ok { ReviewStatus::AutoVerified } else { ReviewStatus::Unreviewed },
        });
    }
    Ok(())
}

fn seeded(master: u64, block: Block, n: usize, mut make: impl FnMut(usize, u64) -> GenParams) -> Vec<GenParams> {
    let base = block_seed(master, block);
    (0..n).map(|i| make(i, derive_seed(base, i as u64))).collect()
}

/// Advanced vulnerable parameters: a subtype-skewed pool evened out by
/// SMOTE over parameter features.
fn advanced_params(master: u64, n: usize, k: usize) -> Result<Vec<GenParams>, CorpusError> {
    let mut pick = SplitMix64::new(block_seed(master, Block::VulnAdvanced));
    let pool = seeded(master, Block::VulnAdvanced, n, |_, seed| {
        // Weights 4:3:2:1 over subtypes in enum order.
        let r = crate::rng::RandomStream::below(&mut pick, 10);
        let sub = match r {
            0..=3 => Subtype::SingleFunction,
            4..=6 => Subtype::CrossFunction,
            7..=8 => Subtype::CrossContract,
            _ => Subtype::ReadOnly,
        };
        GenParams::sampled(GenKind::VulnAdvanced, seed).with_subtype(sub)
    });
    let mut by_subtype: BTreeMap<Subtype, Vec<GenParams>> = Subtype::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for p in pool {
        by_subtype.get_mut(&p.subtype.expect("advanced params carry a subtype")).unwrap().push(p);
    }
    let counts: BTreeMap<Subtype, usize> = by_subtype.iter().map(|(s, v)| (*s, v.len())).collect();
    let deltas = rebalance_subtypes(&counts, n);
    let smote_base = block_seed(master, Block::VulnAdvancedSmote);
    let mut out = Vec::with_capacity(n);
    for (s, mut members) in by_subtype {
        let delta = deltas[&s];
        if delta < 0 {
            members.truncate((members.len() as i64 + delta) as usize);
            out.extend(members);
            continue;
        }
        let features: Vec<_> = members.iter().map(featurize).collect();
        let sub_seed = derive_seed(smote_base, s.index() as u64);
        let mut stream = SplitMix64::new(sub_seed);
        let synthetic = if delta > 0 { smote(&features, k, delta as usize, &mut stream)? } else { Vec::new() };
        out.extend(members);
        for (j, fv) in synthetic.iter().enumerate() {
            out.push(defeaturize(fv, derive_seed(sub_seed, j as u64 + 1)));
        }
    }
    Ok(out)
}

fn list_sol(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "sol"))
        .collect();
    files.sort();
    Ok(files)
}

struct ExternalBlock<'d> {
    what: &'static str,
    dir: Option<&'d Path>,
    needed: usize,
    label: Label,
    provenance: Provenance,
}

/// Ingests modernized files from `dir`; fills any shortfall with stand-ins
/// when allowed.
fn external_block(
    b: &mut Builder<'_>,
    spec: ExternalBlock<'_>,
    allow_standins: bool,
    base_seed: u64,
    standin: impl Fn(usize, u64) -> Result<Option<Candidate>, CorpusError> + Sync,
) -> Result<(), CorpusError> {
    let files = match spec.dir {
        Some(d) => list_sol(d)?,
        None => Vec::new(),
    };
    let modernized: Vec<(PathBuf, Result<String, String>)> = files
        .par_iter()
        .map(|p| {
            let r = fs::read_to_string(p)
                .map_err(|e| e.to_string())
                .and_then(|s| modernize(&s).map(|r| r.source).map_err(|e| e.to_string()));
            (p.clone(), r)
        })
        .collect();
    let mut found = 0;
    for (i, (path, result)) in modernized.into_iter().enumerate() {
        if found == spec.needed {
            break;
        }
        match result {
            Ok(source) => {
                let verdict = detector::analyze_source(&source).map_err(crate::generator::GenError::from)?;
                let subtype = (spec.label == Label::Vulnerable).then(|| verdict.primary_subtype()).flatten();
                let pushed = b.push(Candidate {
                    source,
                    label: spec.label,
                    subtype,
                    provenance: spec.provenance,
                    seed: derive_seed(base_seed, i as u64),
                    verified_by: if agrees(&verdict, spec.label) { VerifiedBy::Both } else { VerifiedBy::External },
                    review_status: ReviewStatus::Unreviewed,
                });
                if pushed {
                    found += 1;
                } else {
                    b.warnings.push(format!("{}: {} duplicates an earlier contract; skipped", spec.what, path.display()));
                }
            }
            Err(e) => b.warnings.push(format!("{}: {} skipped: {e}", spec.what, path.display())),
        }
    }
    if found == spec.needed {
        return Ok(());
    }
    let dir = spec.dir.map_or_else(|| "(none)".to_string(), |d| d.display().to_string());
    if !allow_standins {
        return Err(CorpusError::Shortfall {
            what: spec.what.to_string(),
            needed: spec.needed,
            found,
            dir,
        });
    }
    let missing = spec.needed - found;
    b.warnings.push(format!(
        "{}: {found} of {} contracts found in {dir}; generating {missing} stand-ins marked needs_review",
        spec.what, spec.needed
    ));
    let mut j = 0usize;
    let limit = spec.needed * MAX_RESEEDS as usize + MAX_RESEEDS as usize;
    while found < spec.needed {
        if j > limit {
            return Err(CorpusError::Exhausted(spec.what.to_string()));
        }
        let seed = derive_seed(base_seed ^ 0x7374_616e_6469_6e00, j as u64);
        if let Some(c) = standin(j, seed)? {
            if b.push(c) {
                found += 1;
            }
        }
        j += 1;
    }
    Ok(())
}

/// Legacy stand-in run through the modernizer, as an ingested file would be.
fn legacy_standin(seed: u64, label: Label, subtype: Option<Subtype>, provenance: Provenance) -> Result<Option<Candidate>, CorpusError> {
    let raw = gen_legacy(seed, label, subtype)?;
    let Ok(result) = modernize(&raw) else { return Ok(None) };
    let verdict = detector::analyze_source(&result.source).map_err(crate::generator::GenError::from)?;
    Ok(Some(Candidate {
        source: result.source,
        label,
        subtype,
        provenance,
        seed,
        verified_by: if agrees(&verdict, label) { VerifiedBy::Both } else { VerifiedBy::Generator },
        review_status: ReviewStatus::NeedsReview,
    }))
}

fn generated_standin(params: &GenParams, provenance: Provenance) -> Result<Option<Candidate>, CorpusError> {
    let g = generate(params)?;
    let verdict = detector::analyze_source(&g.source).map_err(crate::generator::GenError::from)?;
    Ok(Some(Candidate {
        label: g.label,
        subtype: g.subtype,
        provenance,
        seed: params.seed,
        verified_by: if agrees(&verdict, g.label) { VerifiedBy::Both } else { VerifiedBy::Generator },
        review_status: ReviewStatus::NeedsReview,
        source: g.source,
    }))
}

fn alternate_local(j: usize) -> Subtype {
    if j.is_multiple_of(2) {
        Subtype::SingleFunction
    } else {
        Subtype::CrossFunction
    }
}

fn finish(b: Builder<'_>, seed: u64) -> Assembled {
    Assembled {
        manifest: CorpusManifest::new(seed, b.records),
        sources: b.sources,
        warnings: b.warnings,
    }
}

/// `count` distinct synthetic contracts, one per seed derived from `seed`,
/// recorded in the training split.
pub fn generate_set(seed: u64, count: usize, make: impl Fn(usize, u64) -> GenParams) -> Result<Assembled, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut b = Builder {
        split: Split::Train,
        seen: &mut seen,
        records: Vec::new(),
        sources: Vec::new(),
        warnings: Vec::new(),
    };
    let params: Vec<GenParams> = (0..count).map(|i| make(i, derive_seed(seed, i as u64))).collect();
    for p in &params {
        p.validate()?;
    }
    synthetic_block(&mut b, params)?;
    Ok(finish(b, seed))
}

/// Training split: synthetic blocks plus modernized external contracts.
pub fn assemble_training(cfg: &AssembleConfig) -> Result<Assembled, CorpusError> {
    let mut seen = BTreeSet::new();
    assemble_training_into(cfg, &mut seen)
}

fn assemble_training_into(cfg: &AssembleConfig, seen: &mut BTreeSet<String>) -> Result<Assembled, CorpusError> {
    let t = &cfg.train;
    let m = cfg.seed;
    let mut b = Builder {
        split: Split::Train,
        seen,
        records: Vec::new(),
        sources: Vec::new(),
        warnings: Vec::new(),
    };

    synthetic_block(&mut b, seeded(m, Block::VulnBasic, t.vuln_basic, |_, s| GenParams::sampled(GenKind::VulnBasic, s)))?;
    synthetic_block(&mut b, advanced_params(m, t.vuln_advanced, cfg.smote_k)?)?;
    external_block(
        &mut b,
        ExternalBlock {
            what: "external vulnerable",
            dir: cfg.external_vuln_dir.as_deref(),
            needed: t.vuln_external,
            label: Label::Vulnerable,
            provenance: Provenance::ModernizedReal,
        },
        cfg.allow_standins,
        block_seed(m, Block::VulnExternal),
        |j, seed| legacy_standin(seed, Label::Vulnerable, Some(alternate_local(j)), Provenance::ModernizedReal),
    )?;
    let patterns = SecurePattern::ALL;
    synthetic_block(
        &mut b,
        seeded(m, Block::SecureBasic, t.secure_basic, |i, s| {
            GenParams::sampled(GenKind::SecureBasic, s).with_pattern(patterns[i % patterns.len()])
        }),
    )?;
    synthetic_block(
        &mut b,
        seeded(m, Block::SecureAdvanced, t.secure_advanced, |_, s| GenParams::sampled(GenKind::SecureAdvanced, s)),
    )?;
    external_block(
        &mut b,
        ExternalBlock {
            what: "external secure",
            dir: cfg.external_secure_dir.as_deref(),
            needed: t.secure_external,
            label: Label::Secure,
            provenance: Provenance::ModernizedReal,
        },
        cfg.allow_standins,
        block_seed(m, Block::SecureExternal),
        |_, seed| legacy_standin(seed, Label::Secure, None, Provenance::ModernizedReal),
    )?;
    Ok(finish(b, m))
}

/// Test split: study contracts, exploit-derived contracts and secure
/// contracts. Sources whose id is in `exclude` are never reused.
pub fn assemble_test(cfg: &AssembleConfig, exclude: &BTreeSet<String>) -> Result<Assembled, CorpusError> {
    let mut seen = exclude.clone();
    assemble_test_into(cfg, &mut seen)
}

fn assemble_test_into(cfg: &AssembleConfig, seen: &mut BTreeSet<String>) -> Result<Assembled, CorpusError> {
    let t = &cfg.test;
    let m = cfg.seed;
    let mut b = Builder {
        split: Split::Test,
        seen,
        records: Vec::new(),
        sources: Vec::new(),
        warnings: Vec::new(),
    };
    let study_vuln = cfg.study_dir.as_ref().map(|d| d.join("vulnerable"));
    let study_secure = cfg.study_dir.as_ref().map(|d| d.join("secure"));

    external_block(
        &mut b,
        ExternalBlock {
            what: "study vulnerable",
            dir: study_vuln.as_deref(),
            needed: t.study_vulnerable,
            label: Label::Vulnerable,
            provenance: Provenance::ModernizedReal,
        },
        cfg.allow_standins,
        block_seed(m, Block::StudyVulnerable),
        |j, seed| legacy_standin(seed, Label::Vulnerable, Some(alternate_local(j)), Provenance::ModernizedReal),
    )?;
    external_block(
        &mut b,
        ExternalBlock {
            what: "exploit",
            dir: cfg.exploit_dir.as_deref(),
            needed: t.exploits,
            label: Label::Vulnerable,
            provenance: Provenance::RealExploit,
        },
        cfg.allow_standins,
        block_seed(m, Block::Exploit),
        |j, seed| {
            // Exploit stand-ins cycle through every subtype, starting with
            // the inter-contract ones the study stand-ins lack.
            const ORDER: [Subtype; 4] = [Subtype::CrossContract, Subtype::ReadOnly, Subtype::CrossFunction, Subtype::SingleFunction];
            let p = GenParams::sampled(GenKind::VulnAdvanced, seed).with_subtype(ORDER[j % 4]);
            generated_standin(&p, Provenance::RealExploit)
        },
    )?;
    external_block(
        &mut b,
        ExternalBlock {
            what: "study secure",
            dir: study_secure.as_deref(),
            needed: t.secure,
            label: Label::Secure,
            provenance: Provenance::ModernizedReal,
        },
        cfg.allow_standins,
        block_seed(m, Block::StudySecure),
        |j, seed| {
            let p = GenParams::sampled(GenKind::SecureBasic, seed).with_pattern(SecurePattern::ALL[j % 4]);
            generated_standin(&p, Provenance::SyntheticBasic)
        },
    )?;
    Ok(finish(b, m))
}

/// Training and test splits with no source shared between them.
pub fn assemble_corpus(cfg: &AssembleConfig) -> Result<Assembled, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut train = assemble_training_into(cfg, &mut seen)?;
    let test = assemble_test_into(cfg, &mut seen)?;
    train.manifest.records.extend(test.manifest.records);
    train.sources.extend(test.sources);
    train.warnings.extend(test.warnings);
    train.manifest.validate()?;
    Ok(train)
}
