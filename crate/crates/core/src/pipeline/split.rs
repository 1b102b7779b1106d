//! Seeded train/test partitioning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

/// Training and test row indices, each in ascending order.
pub fn split_indices(labels: &[String], ratio: f64, seed: u64, stratified: bool) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1], got {ratio}")));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(i);
    }
    if let Some((l, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::invalid(format!("class `{l}` has fewer than 2 rows and cannot be split")));
    }
    if ratio == 1.0 {
        log::warn!("split ratio 1.0 leaves the test set empty");
    }
    let mut r = rng::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if stratified {
        for idx in groups.values_mut() {
            idx.shuffle(&mut r);
            let n_train = (ratio * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..n_train]);
            test.extend_from_slice(&idx[n_train..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut r);
        let n_train = (ratio * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Shuffle split of a labeled matrix; the stratified variant splits every
/// class separately so class proportions carry over to both halves.
pub fn split(m: &FeatureMatrix, ratio: f64, seed: u64, stratified: bool) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let labels = m.require_labels()?;
    let (train, test) = split_indices(labels, ratio, seed, stratified)?;
    Ok((m.select_rows(&train), m.select_rows(&test)))
}
