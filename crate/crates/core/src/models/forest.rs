//! Single CART trees, random forests and extremely randomized trees.

use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{grow_cart, CartParams, EnsembleOutput, Tree, TreeEnsemble};
use super::{ModelSpec, TrainingSet};
use crate::rng::{self, derived_rng};

fn sqrt_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

fn averaged(trees: Vec<Tree>, n_classes: usize) -> TreeEnsemble {
    let w = 1.0 / trees.len() as f64;
    TreeEnsemble {
        n_classes,
        base: vec![0.0; n_classes],
        weights: vec![w; trees.len()],
        targets: vec![None; trees.len()],
        trees,
        output: EnsembleOutput::Probability,
    }
}

pub(crate) fn dt_tree(spec: &ModelSpec, data: &TrainingSet) -> Tree {
    let params = CartParams {
        max_depth: spec.max_depth,
        max_features: None,
        random_thresholds: false,
    };
    let w = vec![1.0; data.n_rows()];
    grow_cart(&data.columns(), &data.y, &w, data.n_classes, params, &mut rng::rng(spec.seed))
}

pub(crate) fn train_dt(spec: &ModelSpec, data: &TrainingSet) -> TreeEnsemble {
    averaged(vec![dt_tree(spec, data)], data.n_classes)
}

/// One forest member: a bootstrap sample drawn from the member's own stream,
/// recorded as per-row multiplicities, then a √d-feature CART tree.
pub(crate) fn rf_member(spec: &ModelSpec, data: &TrainingSet, index: u64) -> Tree {
    let mut r = derived_rng(spec.seed, index);
    let n = data.n_rows();
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[r.random_range(0..n)] += 1.0;
    }
    let params = CartParams {
        max_depth: spec.max_depth,
        max_features: Some(sqrt_features(data.n_features())),
        random_thresholds: false,
    };
    grow_cart(&data.columns(), &data.y, &w, data.n_classes, params, &mut r)
}

pub(crate) fn et_member(spec: &ModelSpec, data: &TrainingSet, index: u64) -> Tree {
    let mut r = derived_rng(spec.seed, index);
    let params = CartParams {
        max_depth: spec.max_depth,
        max_features: Some(sqrt_features(data.n_features())),
        random_thresholds: true,
    };
    let w = vec![1.0; data.n_rows()];
    grow_cart(&data.columns(), &data.y, &w, data.n_classes, params, &mut r)
}

pub(crate) fn train_rf(spec: &ModelSpec, data: &TrainingSet) -> TreeEnsemble {
    let trees = (0..spec.n_estimators as u64)
        .into_par_iter()
        .map(|i| rf_member(spec, data, i))
        .collect();
    averaged(trees, data.n_classes)
}

pub(crate) fn train_et(spec: &ModelSpec, data: &TrainingSet) -> TreeEnsemble {
    let trees = (0..spec.n_estimators as u64)
        .into_par_iter()
        .map(|i| et_member(spec, data, i))
        .collect();
    averaged(trees, data.n_classes)
}
