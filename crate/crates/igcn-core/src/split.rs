//! Stratified train / validation / test splits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::SplitMask;
use crate::rng::seeded;

/// Minimum class size accepted by [`stratified_split`].
pub const MIN_CLASS_SIZE: usize = 3;

/// Splits `n` items into parts proportional to `ratios` by largest
/// remainder. Ties in the fractional part go to the earlier part.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
    // absorb representation error such as 5 * 0.6 = 2.9999...
    let mut sizes: Vec<usize> = quotas.iter().map(|q| libm::floor(q + 1e-9) as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    let frac = |i: usize| quotas[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Per-class seeded shuffle, cut into train / validation / test sizes given by
/// [`apportion`]. Deterministic in `seed`.
pub fn stratified_split(labels: &[usize], ratios: [f64; 3], seed: u64) -> Result<SplitMask> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| !(r >= 0.0)) || libm::fabs(sum - 1.0) > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (j, &l) in labels.iter().enumerate() {
        by_class[l].push(j);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < MIN_CLASS_SIZE {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                need: MIN_CLASS_SIZE,
            });
        }
    }

    let mut rng = seeded(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        let sizes = apportion(members.len(), &ratios);
        let (a, rest) = members.split_at(sizes[0]);
        let (b, c) = rest.split_at(sizes[1]);
        train.extend_from_slice(a);
        val.extend_from_slice(b);
        test.extend_from_slice(c);
    }
    SplitMask::new(train, val, test, labels.len())
}
