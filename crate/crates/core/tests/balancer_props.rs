use std::collections::BTreeMap;

use forge_core::balancer::{defeaturize, featurize, rebalance_subtypes, smote, FeatureVector, FEATURE_LEN, SUBTYPE_SLOTS};
use forge_core::generator::{GenParams, Knobs, KNOB_SPECS};
use forge_core::rng::{RandomStream, SplitMix64};
use forge_core::taxonomy::{GenKind, SecurePattern, Subtype};
use proptest::prelude::*;

/// Brute-force k nearest neighbors by sorting all pairwise distances.
fn brute_knn(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != i)
        .map(|j| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            ((dx * dx + dy * dy).sqrt(), j)
        })
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Whether `p` lies on the segment from `a` to `b`, coordinate-wise.
fn on_segment(p: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let mut lambda = None;
    for c in 0..p.len() {
        let span = b[c] - a[c];
        if span.abs() < 1e-12 {
            if (p[c] - a[c]).abs() > tol {
                return false;
            }
        } else {
            let l = (p[c] - a[c]) / span;
            if let Some(prev) = lambda {
                let diff: f64 = l - prev;
                if (diff * span).abs() > tol {
                    return false;
                }
            }
            lambda.get_or_insert(l);
        }
    }
    lambda.is_none_or(|l| (-1e-9..=1.0 + 1e-9).contains(&l))
}

fn points_2d(seed: u64, n: usize) -> Vec<FeatureVector> {
    let mut s = SplitMix64::new(seed);
    (0..n)
        .map(|_| FeatureVector {
            values: vec![s.next_f64() * 10.0, s.next_f64() * 10.0],
            origin: None,
        })
        .collect()
}

fn synthetic_on_true_nn_segment(minority: &[FeatureVector], synth: &[f64], k: usize) -> bool {
    let raw: Vec<Vec<f64>> = minority.iter().map(|p| p.values.clone()).collect();
    (0..raw.len()).any(|i| brute_knn(&raw, i, k).into_iter().any(|j| on_segment(synth, &raw[i], &raw[j], 1e-9)))
}

#[test]
fn twenty_points_k2_synthetics_lie_on_nn_segments() {
    for seed in 0..25 {
        let pts = points_2d(seed, 20);
        let out = smote(&pts, 2, 60, &mut SplitMix64::new(seed ^ 0xabc)).unwrap();
        assert_eq!(out.len(), 60);
        for s in &out {
            assert!(synthetic_on_true_nn_segment(&pts, &s.values, 2), "seed {seed}: {:?}", s.values);
        }
    }
}

struct ZeroGap(SplitMix64);

impl RandomStream for ZeroGap {
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn next_f64(&mut self) -> f64 {
        0.0
    }
}

#[test]
fn zero_gap_returns_base_points() {
    let pts = points_2d(11, 12);
    for s in smote(&pts, 3, 30, &mut ZeroGap(SplitMix64::new(1))).unwrap() {
        assert!(pts.iter().any(|p| p.values == s.values));
    }
}

#[test]
fn smote_is_deterministic() {
    let pts = points_2d(5, 15);
    let a = smote(&pts, 5, 20, &mut SplitMix64::new(9)).unwrap();
    let b = smote(&pts, 5, 20, &mut SplitMix64::new(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rebalance_reference_counts() {
    let counts = BTreeMap::from([
        (Subtype::SingleFunction, 100),
        (Subtype::CrossFunction, 300),
        (Subtype::CrossContract, 250),
        (Subtype::ReadOnly, 250),
    ]);
    let deltas = rebalance_subtypes(&counts, 900);
    for s in Subtype::ALL {
        assert_eq!(counts[s] as i64 + deltas[s], 225);
    }
}

fn arb_params() -> impl Strategy<Value = GenParams> {
    let knobs = KNOB_SPECS.map(|s| s.min..=s.max);
    (any::<u64>(), 0usize..4, 0usize..4, 0usize..4, knobs).prop_map(|(seed, k, st, pat, kn)| {
        let kind = GenKind::ALL[k];
        let mut p = GenParams::new(kind, seed).with_knobs(Knobs::from_array(kn));
        if kind == GenKind::VulnAdvanced {
            p = p.with_subtype(Subtype::ALL[st]);
        }
        if kind == GenKind::SecureBasic {
            p = p.with_pattern(SecurePattern::ALL[pat]);
        }
        p
    })
}

proptest! {
    #[test]
    fn featurize_round_trips(p in arb_params()) {
        let fv = featurize(&p);
        prop_assert_eq!(fv.values.len(), FEATURE_LEN);
        prop_assert!(fv.values[SUBTYPE_SLOTS..].iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(defeaturize(&fv, p.seed), p);
    }

    #[test]
    fn synthetics_decode_to_valid_params(seed in any::<u64>(), n in 6usize..30) {
        let mut s = SplitMix64::new(seed);
        let minority: Vec<FeatureVector> = (0..n)
            .map(|i| featurize(&GenParams::sampled(GenKind::VulnAdvanced, seed.wrapping_add(i as u64)).with_subtype(Subtype::ReadOnly)))
            .collect();
        for (i, fv) in smote(&minority, 5, 10, &mut s).unwrap().iter().enumerate() {
            let p = defeaturize(fv, i as u64);
            prop_assert!(p.validate().is_ok());
            prop_assert_eq!(p.subtype, Some(Subtype::ReadOnly));
        }
    }

    #[test]
    fn synthetics_are_convex_combinations(seed in any::<u64>(), n in 4usize..25, k in 1usize..3) {
        let pts = points_2d(seed, n);
        let out = smote(&pts, k, 8, &mut SplitMix64::new(seed.rotate_left(7))).unwrap();
        for s in &out {
            prop_assert!(synthetic_on_true_nn_segment(&pts, &s.values, k));
        }
    }

    #[test]
    fn rebalance_is_even_within_one(counts in proptest::array::uniform4(0usize..600), total in 0usize..2000) {
        let map: BTreeMap<Subtype, usize> = Subtype::ALL.iter().copied().zip(counts).collect();
        let deltas = rebalance_subtypes(&map, total);
        let finals: Vec<i64> = Subtype::ALL.iter().map(|s| map[s] as i64 + deltas[s]).collect();
        prop_assert_eq!(finals.iter().sum::<i64>(), total as i64);
        let max = *finals.iter().max().unwrap();
        let min = *finals.iter().min().unwrap();
        prop_assert!(max - min <= 1);
        // Larger shares go to lower enum order.
        prop_assert!(finals.windows(2).all(|w| w[0] >= w[1]));
    }
}
