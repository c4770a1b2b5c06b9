use rand::seq::{index, SliceRandom};

use super::Proportion;
use crate::error::{Error, Result};
use crate::seed;

/// Uniformly random subset of exactly `⌈p·|items|⌉` elements, returned in
/// input order.
pub fn sample_subset<T: Clone>(items: &[T], p: Proportion, seed: u64) -> Vec<T> {
    let k = p.ceil_of(items.len());
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, items.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Splits `items` into train/valid/test from a single shuffled permutation:
/// the first `⌈p_train·n⌉` go to train, the next `⌈p_valid·n⌉` (capped by
/// what remains) to valid, the rest to test.
pub fn three_way_split<T: Clone>(
    items: &[T],
    p_train: Proportion,
    p_valid: Proportion,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if p_train.checked_add(p_valid).is_none() {
        return Err(Error::invalid(format!("train fraction {p_train} plus valid fraction {p_valid} exceeds 1")));
    }
    let n = items.len();
    let n_train = p_train.ceil_of(n);
    let n_valid = p_valid.ceil_of(n).min(n - n_train);
    Ok(split_by_sizes(items, n_train, n_valid, seed))
}

/// Shuffles once and slices into `(n_train, n_valid, rest)`.
pub(crate) fn split_by_sizes<T: Clone>(
    items: &[T],
    n_train: usize,
    n_valid: usize,
    seed: u64,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    assert!(n_train + n_valid <= items.len(), "split sizes exceed the pool");
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    let train = pick(&order[..n_train]);
    let valid = pick(&order[n_train..n_train + n_valid]);
    let test = pick(&order[n_train + n_valid..]);
    (train, valid, test)
}
