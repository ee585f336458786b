//! Prediction ingestion, confusion matrices with abstention accounting, and
//! classification metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusManifest, Split};
use crate::taxonomy::Label;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: schema error: {message}")]
    SchemaError { line: usize, message: String },
    #[error("line {line}: duplicate prediction for id {id}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: id {id} is not in the test split")]
    UnknownId { id: String, line: usize },
    #[error("cannot realize matrix: {0}")]
    Unrealizable(String),
    #[error("no reports to compare")]
    NoReports,
    #[error("{name}: {message}")]
    BadReport { name: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Vulnerable,
    Secure,
    Abstain,
}

impl Prediction {
    pub fn as_label(self) -> Option<Label> {
        match self {
            Prediction::Vulnerable => Some(Label::Vulnerable),
            Prediction::Secure => Some(Label::Secure),
            Prediction::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub prediction: Prediction,
}

/// Parses line-delimited predictions, checking each id against the test
/// split of `manifest`. Blank lines are skipped; line numbers are 1-based.
pub fn parse_predictions(text: &str, manifest: &CorpusManifest) -> Result<Vec<PredictionRecord>, EvalError> {
    let test_ids: BTreeSet<&str> = manifest.split(Split::Test).map(|r| r.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| EvalError::SchemaError {
            line: line_no,
            message: e.to_string(),
        })?;
        if !test_ids.contains(rec.id.as_str()) {
            return Err(EvalError::UnknownId { id: rec.id, line: line_no });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(EvalError::DuplicateId { id: rec.id, line: line_no });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_predictions(path: &Path, manifest: &CorpusManifest) -> Result<Vec<PredictionRecord>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_predictions(&text, manifest)
}

pub fn predictions_to_jsonl(preds: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("predictions serialize"));
        out.push('\n');
    }
    out
}

/// Counts by actual × predicted with vulnerable as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub abstained: usize,
}

impl ConfusionMatrix {
    pub fn classified(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn total(&self) -> usize {
        self.classified() + self.abstained
    }
}

/// Builds the matrix over the manifest's test split. Test records without a
/// prediction count as abstained.
pub fn confusion(manifest: &CorpusManifest, predictions: &[PredictionRecord]) -> ConfusionMatrix {
    let by_id: BTreeMap<&str, Prediction> = predictions.iter().map(|p| (p.id.as_str(), p.prediction)).collect();
    let mut m = ConfusionMatrix::default();
    for r in manifest.split(Split::Test) {
        let predicted = by_id.get(r.id.as_str()).and_then(|p| p.as_label());
        match (r.label, predicted) {
            (_, None) => m.abstained += 1,
            (Label::Vulnerable, Some(Label::Vulnerable)) => m.tp += 1,
            (Label::Vulnerable, Some(Label::Secure)) => m.fn_ += 1,
            (Label::Secure, Some(Label::Vulnerable)) => m.fp += 1,
            (Label::Secure, Some(Label::Secure)) => m.tn += 1,
        }
    }
    m
}

/// A prediction set over the test split of `manifest` whose confusion matrix
/// is exactly `target`. Records are taken in manifest order per class:
/// correct first, then wrong, then abstain. Abstentions are split so that
/// each class's counts add up to its size.
pub fn realize_matrix(manifest: &CorpusManifest, target: &ConfusionMatrix) -> Result<Vec<PredictionRecord>, EvalError> {
    let vuln: Vec<&str> = manifest
        .split(Split::Test)
        .filter(|r| r.label == Label::Vulnerable)
        .map(|r| r.id.as_str())
        .collect();
    let secure: Vec<&str> = manifest
        .split(Split::Test)
        .filter(|r| r.label == Label::Secure)
        .map(|r| r.id.as_str())
        .collect();
    let total = vuln.len() + secure.len();
    if target.total() != total {
        return Err(EvalError::Unrealizable(format!("matrix covers {} records, test split has {total}", target.total())));
    }
    if target.tp + target.fn_ > vuln.len() || target.tn + target.fp > secure.len() {
        return Err(EvalError::Unrealizable(format!(
            "test split has {} vulnerable and {} secure records",
            vuln.len(),
            secure.len()
        )));
    }
    let mut out = Vec::with_capacity(total);
    let mut assign = |ids: &[&str], right: usize, wrong: usize, right_p: Prediction, wrong_p: Prediction| {
        for (i, id) in ids.iter().enumerate() {
            let prediction = if i < right {
                right_p
            } else if i < right + wrong {
                wrong_p
            } else {
                Prediction::Abstain
            };
            out.push(PredictionRecord {
                id: id.to_string(),
                prediction,
            });
        }
    };
    assign(&vuln, target.tp, target.fn_, Prediction::Vulnerable, Prediction::Secure);
    assign(&secure, target.tn, target.fp, Prediction::Secure, Prediction::Vulnerable);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
    /// Over classified records only.
    pub accuracy: f64,
    /// Over every test record, abstentions counted wrong.
    pub coverage_adjusted_accuracy: f64,
    /// Keyed by `secure` and `vulnerable`.
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// Support-weighted means over classified actuals.
    pub weighted: WeightedMetrics,
    pub matrix: ConfusionMatrix,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

impl MetricsReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.as_str()]
    }
}

struct Ratio {
    zero_division: bool,
}

impl Ratio {
    fn div(&mut self, num: f64, den: f64) -> f64 {
        if den == 0.0 {
            self.zero_division = true;
            0.0
        } else {
            num / den
        }
    }
}

// A zero F1 from zero precision and recall is not a zero division.
fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 per class, support-weighted averages, and both
/// accuracy variants. Zero denominators give 0 and set `zero_division`.
pub fn metrics(m: &ConfusionMatrix) -> MetricsReport {
    let mut z = Ratio { zero_division: false };
    let (tp, fp, tn, fn_) = (m.tp as f64, m.fp as f64, m.tn as f64, m.fn_ as f64);

    let vp = z.div(tp, tp + fp);
    let vr = z.div(tp, tp + fn_);
    let vuln = ClassMetrics {
        precision: vp,
        recall: vr,
        f1: f1(vp, vr),
        support: m.tp + m.fn_,
    };
    let sp = z.div(tn, tn + fn_);
    let sr = z.div(tn, tn + fp);
    let secure = ClassMetrics {
        precision: sp,
        recall: sr,
        f1: f1(sp, sr),
        support: m.tn + m.fp,
    };

    let support = (vuln.support + secure.support) as f64;
    let weigh = |z: &mut Ratio, f: fn(&ClassMetrics) -> f64| {
        z.div(f(&vuln) * vuln.support as f64 + f(&secure) * secure.support as f64, support)
    };
    let weighted = WeightedMetrics {
        precision: weigh(&mut z, |c| c.precision),
        recall: weigh(&mut z, |c| c.recall),
        f1: weigh(&mut z, |c| c.f1),
    };
    let accuracy = z.div(tp + tn, m.classified() as f64);
    let coverage_adjusted_accuracy = z.div(tp + tn, m.total() as f64);

    let mut per_class = BTreeMap::new();
    per_class.insert(Label::Secure.as_str().to_string(), secure);
    per_class.insert(Label::Vulnerable.as_str().to_string(), vuln);
    MetricsReport {
        name: None,
        params: None,
        accuracy,
        coverage_adjusted_accuracy,
        per_class,
        weighted,
        matrix: *m,
        zero_division: z.zero_division,
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    /// Percent, full precision.
    pub accuracy: f64,
    pub skipped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
}

/// A report as supplied for comparison. Externally produced reports may
/// carry only `accuracy`, plus `skipped` or a `matrix`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ComparisonInput {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub params: Option<String>,
    pub accuracy: f64,
    #[serde(default)]
    pub skipped: Option<usize>,
    #[serde(default)]
    pub matrix: Option<ConfusionMatrix>,
}

impl ComparisonInput {
    pub fn from_report(name: &str, r: &MetricsReport) -> Self {
        Self {
            name: Some(r.name.clone().unwrap_or_else(|| name.to_string())),
            params: r.params.clone(),
            accuracy: r.accuracy,
            skipped: Some(r.matrix.abstained),
            matrix: Some(r.matrix),
        }
    }

    /// Reads a report file; the file stem names it unless the report does.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut input: ComparisonInput = serde_json::from_str(&text).map_err(|e| EvalError::BadReport {
            name: path.display().to_string(),
            message: e.to_string(),
        })?;
        input.name.get_or_insert(stem);
        Ok(input)
    }

    fn row(&self, fallback: usize) -> Result<ComparisonRow, EvalError> {
        let name = self.name.clone().unwrap_or_else(|| format!("report{}", fallback + 1));
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(EvalError::BadReport {
                name,
                message: format!("accuracy {} outside [0, 1]", self.accuracy),
            });
        }
        let skipped = self.skipped.or(self.matrix.map(|m| m.abstained)).unwrap_or(0);
        Ok(ComparisonRow {
            name,
            accuracy: self.accuracy * 100.0,
            skipped,
            params: self.params.clone(),
        })
    }
}

/// Rows sorted by accuracy descending, ties by name.
pub fn compare(inputs: &[ComparisonInput]) -> Result<Vec<ComparisonRow>, EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::NoReports);
    }
    let mut rows = inputs.iter().enumerate().map(|(i, r)| r.row(i)).collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.name.cmp(&b.name)));
    Ok(rows)
}

/// Fixed-width text rendering with two-decimal percentages.
pub struct ComparisonTable<'a>(pub &'a [ComparisonRow]);

impl fmt::Display for ComparisonTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.0.iter().map(|r| r.name.len()).max().unwrap_or(0).max("model".len());
        writeln!(f, "{:<width$}  {:>9}  {:>7}  params", "model", "accuracy", "skipped")?;
        for r in self.0 {
            let acc = format!("{:.2}%", r.accuracy);
            writeln!(f, "{:<width$}  {:>9}  {:>7}  {}", r.name, acc, r.skipped, r.params.as_deref().unwrap_or("-"))?;
        }
        Ok(())
    }
}

/// Two-decimal text rendering of a report.
pub struct ReportTable<'a>(pub &'a MetricsReport);

impl fmt::Display for ReportTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        writeln!(f, "{:<12} {:>9} {:>6} {:>8} {:>7}", "class", "precision", "recall", "f1", "support")?;
        for label in [Label::Secure, Label::Vulnerable] {
            let c = r.class(label);
            writeln!(
                f,
                "{:<12} {:>9.2} {:>6.2} {:>8.2} {:>7}",
                label.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )?;
        }
        let w = &r.weighted;
        writeln!(f, "{:<12} {:>9.2} {:>6.2} {:>8.2}", "weighted", w.precision, w.recall, w.f1)?;
        let m = &r.matrix;
        writeln!(f, "accuracy {:.2}% over {} classified", r.accuracy * 100.0, m.classified())?;
        writeln!(f, "coverage-adjusted accuracy {:.2}% over {}", r.coverage_adjusted_accuracy * 100.0, m.total())?;
        write!(f, "tn {} fp {} fn {} tp {} abstained {}", m.tn, m.fp, m.fn_, m.tp, m.abstained)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_matrix_flags_zero_division() {
        let r = metrics(&ConfusionMatrix::default());
        assert!(r.zero_division);
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.weighted.f1, 0.0);
    }

    #[test]
    fn perfect_matrix() {
        let r = metrics(&ConfusionMatrix {
            tp: 3,
            tn: 2,
            ..Default::default()
        });
        assert!(!r.zero_division);
        for c in r.per_class.values() {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.coverage_adjusted_accuracy, 1.0);
    }

    #[test]
    fn matrix_serializes_fn_key() {
        let text = serde_json::to_string(&ConfusionMatrix::default()).unwrap();
        assert_eq!(text, r#"{"tp":0,"fp":0,"tn":0,"fn":0,"abstained":0}"#);
    }

    #[test]
    fn compare_needs_input() {
        assert!(matches!(compare(&[]), Err(EvalError::NoReports)));
    }
}
