//! SMOTE over generation parameters.
//!
//! Parameters are embedded as a one-hot subtype block followed by the knobs
//! scaled to `[0, 1]`. Synthetic vectors are decoded back by rounding and
//! clamping, then rendered by the generator like any other parameter set.

use std::collections::BTreeMap;

use crate::generator::{GenParams, Knobs, KNOB_SPECS};
use crate::rng::RandomStream;
use crate::taxonomy::{GenKind, Subtype};

pub const SUBTYPE_SLOTS: usize = 4;
pub const FEATURE_LEN: usize = SUBTYPE_SLOTS + KNOB_SPECS.len();
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BalanceError {
    #[error("SMOTE needs more than k = {k} minority samples, got {got}")]
    InsufficientSamples { k: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("feature vectors have mismatched lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub origin: Option<GenParams>,
}

pub fn featurize(params: &GenParams) -> FeatureVector {
    let mut values = vec![0.0; FEATURE_LEN];
    if let Some(s) = params.subtype {
        values[s.index()] = 1.0;
    }
    for (i, (spec, v)) in KNOB_SPECS.iter().zip(params.knobs.to_array()).enumerate() {
        values[SUBTYPE_SLOTS + i] = (v.clamp(spec.min, spec.max) - spec.min) as f64 / (spec.max - spec.min) as f64;
    }
    FeatureVector {
        values,
        origin: Some(params.clone()),
    }
}

/// Decodes a feature vector. Kind and secure pattern come from the origin
/// (vuln_advanced when absent); the subtype is the largest one-hot slot,
/// lowest enum order on ties.
pub fn defeaturize(fv: &FeatureVector, seed: u64) -> GenParams {
    let kind = fv.origin.as_ref().map_or(GenKind::VulnAdvanced, |o| o.kind);
    let mut knobs = [0u32; KNOB_SPECS.len()];
    for (i, spec) in KNOB_SPECS.iter().enumerate() {
        let x = fv.values.get(SUBTYPE_SLOTS + i).copied().unwrap_or(0.0).clamp(0.0, 1.0);
        knobs[i] = spec.min + (x * (spec.max - spec.min) as f64).round() as u32;
    }
    let subtype = (kind == GenKind::VulnAdvanced).then(|| {
        let mut best = 0;
        for i in 1..SUBTYPE_SLOTS {
            if fv.values[i] > fv.values[best] {
                best = i;
            }
        }
        Subtype::ALL[best]
    });
    GenParams {
        seed,
        kind,
        subtype,
        secure_pattern: fv.origin.as_ref().and_then(|o| o.secure_pattern),
        knobs: Knobs::from_array(knobs),
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest neighbors of each point (Euclidean, ties by index).
pub fn nearest_neighbors(points: &[FeatureVector], k: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| (squared_distance(&p.values, &q.values), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Generates `n_new` synthetic samples. Each one picks a random base point,
/// one of its `k` nearest neighbors, and a gap `λ ∈ [0, 1)`:
/// `x' = x + λ (x_nn - x)`.
pub fn smote(
    minority: &[FeatureVector],
    k: usize,
    n_new: usize,
    stream: &mut impl RandomStream,
) -> Result<Vec<FeatureVector>, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    if minority.len() <= k {
        return Err(BalanceError::InsufficientSamples { k, got: minority.len() });
    }
    let dim = minority[0].values.len();
    if let Some(bad) = minority.iter().find(|p| p.values.len() != dim) {
        return Err(BalanceError::DimensionMismatch(dim, bad.values.len()));
    }
    let neighbors = nearest_neighbors(minority, k);
    let mut out = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let base = stream.below(minority.len() as u64) as usize;
        let nn = neighbors[base][stream.below(k as u64) as usize];
        let gap = stream.next_f64();
        let x = &minority[base].values;
        let y = &minority[nn].values;
        out.push(FeatureVector {
            values: x.iter().zip(y).map(|(a, b)| a + gap * (b - a)).collect(),
            origin: minority[base].origin.clone(),
        });
    }
    Ok(out)
}

/// Per-subtype count change that evens the distribution at `target_total`.
/// The remainder goes to the lowest enum order first.
pub fn rebalance_subtypes(counts: &BTreeMap<Subtype, usize>, target_total: usize) -> BTreeMap<Subtype, i64> {
    let targets = subtype_targets(target_total);
    Subtype::ALL
        .iter()
        .map(|s| (*s, targets[s] as i64 - counts.get(s).copied().unwrap_or(0) as i64))
        .collect()
}

pub fn subtype_targets(target_total: usize) -> BTreeMap<Subtype, usize> {
    let n = Subtype::ALL.len();
    let base = target_total / n;
    let rem = target_total % n;
    Subtype::ALL.iter().enumerate().map(|(i, s)| (*s, base + usize::from(i < rem))).collect()
}
