//! Corpus records, manifest persistence, stratified splitting, assembly and
//! label verification.

mod assemble;
mod split;
mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use assemble::{
    assemble_corpus, assemble_test, assemble_training, generate_set, AssembleConfig, Assembled, TestSpec, TrainSpec,
};
pub use split::stratified_split;
pub use verify::{verify_corpus, Agreement, Strictness, VerifyEntry, VerifyReport, VerifySummary};

use crate::taxonomy::{Label, Provenance, Subtype};

pub const SCHEMA_VERSION: &str = "1.0";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const META_FILE: &str = "manifest.meta.json";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: malformed manifest record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("shortfall: {what} needs {needed} contracts, {found} usable in {dir}; pass --allow-standins to fill the gap")]
    Shortfall { what: String, needed: usize, found: usize, dir: String },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("manifest metadata does not match records: {0}")]
    MetaMismatch(String),
    #[error(transparent)]
    Generation(#[from] crate::generator::GenError),
    #[error(transparent)]
    Balance(#[from] crate::balancer::BalanceError),
    #[error("could not produce a unique contract for {0} after repeated reseeding")]
    Exhausted(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifiedBy {
    Generator,
    Detector,
    Both,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Unreviewed,
    AutoVerified,
    NeedsReview,
}

/// One contract. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    /// Path relative to the corpus root.
    pub file: String,
    pub label: Label,
    pub subtype: Option<Subtype>,
    pub provenance: Provenance,
    pub split: Split,
    pub seed: u64,
    pub solidity_version: String,
    pub verified_by: VerifiedBy,
    pub review_status: ReviewStatus,
}

pub fn contract_path(split: Split, id: &str) -> String {
    format!("{}/contracts/{id}.sol", split.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountKey {
    pub label: Label,
    pub provenance: Provenance,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    #[serde(flatten)]
    pub key: CountKey,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub schema_version: String,
    pub master_seed: u64,
    pub records: Vec<ManifestRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestMeta {
    schema_version: String,
    master_seed: u64,
    record_count: usize,
    manifest_sha256: String,
    counts: Vec<CountEntry>,
}

impl CorpusManifest {
    pub fn new(master_seed: u64, records: Vec<ManifestRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            master_seed,
            records,
        }
    }

    /// Record counts per label × provenance × split.
    pub fn counts(&self) -> BTreeMap<CountKey, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            let key = CountKey {
                label: r.label,
                provenance: r.provenance,
                split: r.split,
            };
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }

    pub fn count_where(&self, pred: impl Fn(&ManifestRecord) -> bool) -> usize {
        self.records.iter().filter(|r| pred(r)).count()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Checks id uniqueness and train/test disjointness.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
            if r.provenance == Provenance::RealExploit && r.split != Split::Test {
                return Err(CorpusError::MetaMismatch(format!("real_exploit record {} outside the test split", r.id)));
            }
        }
        Ok(())
    }

    /// Line-delimited records, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the manifest file contents.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    /// Writes `manifest.jsonl` and `manifest.meta.json` under `root`.
    pub fn write(&self, root: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let path = root.join(MANIFEST_FILE);
        let mut f = io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        f.write_all(self.to_jsonl().as_bytes()).map_err(io_err(&path))?;
        f.flush().map_err(io_err(&path))?;
        let meta = ManifestMeta {
            schema_version: self.schema_version.clone(),
            master_seed: self.master_seed,
            record_count: self.records.len(),
            manifest_sha256: self.hash(),
            counts: self.counts().into_iter().map(|(key, count)| CountEntry { key, count }).collect(),
        };
        let meta_path = root.join(META_FILE);
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))
    }

    /// Reads a manifest from its `.jsonl` path. The sibling metadata file is
    /// optional; when present its seed, counts and hash are checked.
    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut records = Vec::new();
        for (i, line) in io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        let meta_path = path.with_file_name(META_FILE);
        let mut manifest = CorpusManifest::new(0, records);
        if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
            let meta: ManifestMeta = serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
                path: meta_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            manifest.schema_version = meta.schema_version;
            manifest.master_seed = meta.master_seed;
            if meta.record_count != manifest.records.len() {
                return Err(CorpusError::MetaMismatch(format!(
                    "{} records listed, {} in metadata",
                    manifest.records.len(),
                    meta.record_count
                )));
            }
            if meta.manifest_sha256 != manifest.hash() {
                return Err(CorpusError::MetaMismatch("manifest hash differs".into()));
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Writes contract sources and the manifest under `root`. `sources` is
/// parallel to `manifest.records`.
pub fn write_corpus(root: &Path, manifest: &CorpusManifest, sources: &[String]) -> Result<(), CorpusError> {
    assert_eq!(manifest.records.len(), sources.len(), "one source per record");
    for split in [Split::Train, Split::Test] {
        let dir = root.join(split.as_str()).join("contracts");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for (r, src) in manifest.records.iter().zip(sources) {
        let path = root.join(&r.file);
        fs::write(&path, src).map_err(io_err(&path))?;
    }
    manifest.write(root)
}
