use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetError;

/// Percentages for train/dev/test; must sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    pub train: u32,
    pub dev: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 70,
            dev: 15,
            test: 15,
        }
    }
}

impl SplitRatios {
    fn as_array(self) -> [u32; 3] {
        [self.train, self.dev, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Splits `n` items by largest remainder so every share is within one item
/// of its exact value.
pub fn allocate(n: usize, ratios: SplitRatios) -> [usize; 3] {
    let r = ratios.as_array();
    let mut counts = [0usize; 3];
    let mut remainders = [(0u64, 0usize); 3];
    for (i, share) in r.iter().enumerate() {
        let scaled = n as u64 * *share as u64;
        counts[i] = (scaled / 100) as usize;
        remainders[i] = (scaled % 100, i);
    }
    let leftover = n - counts.iter().sum::<usize>();
    // Largest remainder first; earlier split wins ties.
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Stratified train/dev/test split. Items are grouped by `key`, each group is
/// shuffled with a ChaCha8 generator seeded from `seed` and cut by
/// [`allocate`]. Within each split items keep their input order.
pub fn stratified_split_by<T: Clone, K: Ord>(
    items: &[T],
    key: impl Fn(&T) -> K,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split<T>, DatasetError> {
    if ratios.as_array().iter().sum::<u32>() != 100 {
        return Err(DatasetError::InvalidRatios(ratios.as_array()));
    }
    if items.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(key(item)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned: [Vec<usize>; 3] = Default::default();
    for indices in groups.values_mut() {
        indices.shuffle(&mut rng);
        let counts = allocate(indices.len(), ratios);
        let mut rest = indices.as_slice();
        for (split, n) in assigned.iter_mut().zip(counts) {
            let (head, tail) = rest.split_at(n);
            split.extend_from_slice(head);
            rest = tail;
        }
    }
    let [train, dev, test] = assigned.map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect::<Vec<_>>()
    });
    Ok(Split { train, dev, test })
}

/// Balanced class weights `N / (K * n_c)` over the labels present.
pub fn class_weights<K: Ord>(labels: impl IntoIterator<Item = K>) -> Result<BTreeMap<K, f64>, DatasetError> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for label in labels {
        *counts.entry(label).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let total: usize = counts.values().sum();
    let k = counts.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(label, n)| (label, total as f64 / (k * n as f64)))
        .collect())
}
