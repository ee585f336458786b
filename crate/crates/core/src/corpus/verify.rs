use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorpusManifest, ManifestRecord};
use crate::detector::{analyze_source, Classification};
use crate::taxonomy::{Label, Provenance, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    Inconclusive,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    Strict,
    #[default]
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub id: String,
    pub label: Label,
    pub subtype: Option<Subtype>,
    pub provenance: Provenance,
    pub verdict: Option<Classification>,
    pub agreement: Agreement,
    pub fatal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub total: usize,
    pub agree: usize,
    pub disagree: usize,
    pub inconclusive: usize,
    pub errors: usize,
    pub fatal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
    pub summary: VerifySummary,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.summary.fatal == 0
    }
}

/// Records whose label the detector is expected to reproduce: the basic
/// synthetic templates and the single/cross-function advanced ones.
pub fn detector_decidable(r: &ManifestRecord) -> bool {
    match r.provenance {
        Provenance::SyntheticBasic => true,
        Provenance::SyntheticAdvanced => r.label == Label::Vulnerable && r.subtype.is_some_and(Subtype::is_detector_decidable),
        _ => false,
    }
}

fn check(root: &Path, r: &ManifestRecord, strictness: Strictness) -> VerifyEntry {
    let outcome = fs::read_to_string(root.join(&r.file))
        .map_err(|e| format!("{}: {e}", r.file))
        .and_then(|src| analyze_source(&src).map_err(|e| format!("{}: {e}", r.file)));
    let (verdict, agreement, error) = match outcome {
        Ok(v) => {
            let a = match v.classification.as_label() {
                None => Agreement::Inconclusive,
                Some(l) if l == r.label => Agreement::Agree,
                Some(_) => Agreement::Disagree,
            };
            (Some(v.classification), a, None)
        }
        Err(e) => (None, Agreement::Error, Some(e)),
    };
    let fatal = match (agreement, strictness) {
        (Agreement::Agree, _) => false,
        (Agreement::Error, _) => true,
        (_, Strictness::Strict) => true,
        (Agreement::Disagree, Strictness::Permissive) => detector_decidable(r),
        (Agreement::Inconclusive, Strictness::Permissive) => false,
    };
    VerifyEntry {
        id: r.id.clone(),
        label: r.label,
        subtype: r.subtype,
        provenance: r.provenance,
        verdict,
        agreement,
        fatal,
        error,
    }
}

/// Runs the detector over every record and compares with its label.
/// `root` is the directory record paths are relative to.
pub fn verify_corpus(manifest: &CorpusManifest, root: &Path, strictness: Strictness) -> VerifyReport {
    let entries: Vec<VerifyEntry> = manifest.records.par_iter().map(|r| check(root, r, strictness)).collect();
    let mut summary = VerifySummary {
        total: entries.len(),
        ..Default::default()
    };
    for e in &entries {
        match e.agreement {
            Agreement::Agree => summary.agree += 1,
            Agreement::Disagree => summary.disagree += 1,
            Agreement::Inconclusive => summary.inconclusive += 1,
            Agreement::Error => summary.errors += 1,
        }
        summary.fatal += usize::from(e.fatal);
    }
    VerifyReport { entries, summary }
}
