//! Multi-class AdaBoost (SAMME) over depth-capped CART trees.

use super::tree::{argmax, grow_cart, CartParams, EnsembleOutput, Tree, TreeEnsemble};
use super::{ModelSpec, TrainingSet};
use crate::rng::derived_rng;

/// Leaves become one-hot votes for their majority class.
fn to_votes(mut tree: Tree) -> Tree {
    tree.map_leaves(|v| {
        let k = argmax(v);
        v.iter_mut().enumerate().for_each(|(i, x)| *x = if i == k { 1.0 } else { 0.0 });
    });
    tree
}

/// Scores are the alpha-weighted vote normalized by the total alpha, so they
/// sum to one and serve as both margins and probabilities.
pub(crate) fn train_ab(spec: &ModelSpec, data: &TrainingSet) -> TreeEnsemble {
    let n = data.n_rows();
    let k = data.n_classes as f64;
    let params = CartParams {
        max_depth: spec.max_depth,
        max_features: None,
        random_thresholds: false,
    };
    let mut w = vec![1.0; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    for m in 0..spec.n_estimators {
        let mut r = derived_rng(spec.seed, m as u64);
        let tree = to_votes(grow_cart(&data.columns(), &data.y, &w, data.n_classes, params, &mut r));
        let wrong: Vec<bool> = (0..n)
            .map(|i| argmax(tree.predict(&data.rows[i])) != data.y[i])
            .collect();
        let total: f64 = w.iter().sum();
        let err = wrong.iter().zip(&w).filter(|(b, _)| **b).map(|(_, w)| w).sum::<f64>() / total;
        if err <= 0.0 {
            trees.push(tree);
            alphas.push(1.0);
            break;
        }
        if err >= 1.0 - 1.0 / k {
            // no better than chance; keep only if nothing else exists
            if trees.is_empty() {
                trees.push(tree);
                alphas.push(1.0);
            }
            break;
        }
        let alpha = spec.learning_rate * (((1.0 - err) / err).ln() + (k - 1.0).ln());
        for (wi, bad) in w.iter_mut().zip(&wrong) {
            if *bad {
                *wi *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= n as f64 / s);
        trees.push(tree);
        alphas.push(alpha);
    }
    let total: f64 = alphas.iter().sum();
    TreeEnsemble {
        n_classes: data.n_classes,
        base: vec![0.0; data.n_classes],
        weights: alphas.iter().map(|a| a / total).collect(),
        targets: vec![None; trees.len()],
        trees,
        output: EnsembleOutput::WeightedVote,
    }
}
