use std::collections::BTreeMap;

use super::CorpusError;
use crate::rng::{RandomStream, SplitMix64};

/// Assigns each item to a split index so that every stratum is divided in
/// proportion to `fractions`, within one item per split.
///
/// Strata are shuffled with a stream derived from `seed`; quotas use the
/// largest-remainder rule, ties going to the larger fraction and then to the
/// lower split index. A single-item stratum therefore lands in the split with
/// the largest fraction.
pub fn stratified_split<T, K: Ord>(
    items: &[T],
    key: impl Fn(&T) -> K,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<usize>, CorpusError> {
    if fractions.is_empty() || fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(CorpusError::InvalidFractions(format!("{fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidFractions(format!("{fractions:?} sums to {total}")));
    }

    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        strata.entry(key(item)).or_default().push(i);
    }

    let mut out = vec![0; items.len()];
    for (n, members) in strata.into_values().enumerate() {
        let mut members = members;
        let mut rng = SplitMix64::for_index(seed, n as u64);
        for i in (1..members.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            members.swap(i, j);
        }
        let quotas = largest_remainder(members.len(), fractions);
        let mut cursor = 0;
        for (split, q) in quotas.into_iter().enumerate() {
            for &m in &members[cursor..cursor + q] {
                out[m] = split;
            }
            cursor += q;
        }
    }
    Ok(out)
}

fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quotas[a] as f64;
        let rb = exact[b] - quotas[b] as f64;
        rb.total_cmp(&ra).then(fractions[b].total_cmp(&fractions[a])).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        quotas[i] += 1;
        left -= 1;
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_fifty_at_eighty_twenty() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let s = stratified_split(&labels, |l| *l, &[0.8, 0.2], 3).unwrap();
        for class in 0..2u8 {
            let train = (0..100).filter(|&i| labels[i] == class && s[i] == 0).count();
            assert_eq!(train, 40);
        }
    }

    #[test]
    fn single_record_goes_to_larger_fraction() {
        assert_eq!(stratified_split(&[()], |_| 0, &[0.2, 0.8], 1).unwrap(), [1]);
        assert_eq!(stratified_split(&[()], |_| 0, &[0.8, 0.2], 1).unwrap(), [0]);
    }

    #[test]
    fn bad_fractions() {
        assert!(stratified_split(&[1], |x| *x, &[0.5, 0.6], 0).is_err());
        assert!(stratified_split(&[1], |x| *x, &[], 0).is_err());
        let empty: [u8; 0] = [];
        assert!(stratified_split(&empty, |x| *x, &[1.0], 0).unwrap().is_empty());
    }
}
