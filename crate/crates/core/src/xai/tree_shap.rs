//! Interventional Shapley values for tree ensembles.
//!
//! For one explained row `x` and one background row `b`, a tree's output on a
//! composite row (x on S, b off S) is the value of the single leaf whose path
//! is consistent with S. Walking the tree while tracking the features that
//! sent the path the way of `x` (set A) or the way of `b` (set B), a leaf
//! contributes `v * [A ⊆ S, B ∩ S = ∅]`, a game whose Shapley values are
//! `v (|A|-1)! |B|! / (|A|+|B|)!` for members of A and
//! `-v |A|! (|B|-1)! / (|A|+|B|)!` for members of B.

use rayon::prelude::*;

use super::{check_inputs, Attribution};
use crate::error::{Error, Result};
use crate::models::{Node, Tree, TreeEnsemble};

/// Where the explained and background rows go at a split.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    None,
    X,
    B,
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    b: &'a [f64],
    side: Vec<Side>,
    /// `fact[n] = n!`
    fact: &'a [f64],
}

impl Walk<'_> {
    fn go(&mut self, node: usize, a: usize, nb: usize, leaf_value: &dyn Fn(&[f64]) -> f64, phi: &mut [f64]) {
        match &self.tree.nodes[node] {
            Node::Leaf { value } => {
                let v = leaf_value(value);
                if v == 0.0 || a + nb == 0 {
                    return;
                }
                let wa = if a > 0 {
                    self.fact[a - 1] * self.fact[nb] / self.fact[a + nb]
                } else {
                    0.0
                };
                let wb = if nb > 0 {
                    self.fact[a] * self.fact[nb - 1] / self.fact[a + nb]
                } else {
                    0.0
                };
                for (j, s) in self.side.iter().enumerate() {
                    match s {
                        Side::X => phi[j] += v * wa,
                        Side::B => phi[j] -= v * wb,
                        Side::None => {}
                    }
                }
            }
            &Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let xc = if self.x[feature] <= threshold { left } else { right };
                let bc = if self.b[feature] <= threshold { left } else { right };
                match self.side[feature] {
                    Side::X => self.go(xc, a, nb, leaf_value, phi),
                    Side::B => self.go(bc, a, nb, leaf_value, phi),
                    Side::None if xc == bc => self.go(xc, a, nb, leaf_value, phi),
                    Side::None => {
                        self.side[feature] = Side::X;
                        self.go(xc, a + 1, nb, leaf_value, phi);
                        self.side[feature] = Side::B;
                        self.go(bc, a, nb + 1, leaf_value, phi);
                        self.side[feature] = Side::None;
                    }
                }
            }
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Shapley values of `ensemble.score(., class)` under the interventional
/// value function over `background`.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64], class: usize, background: &[Vec<f64>]) -> Result<Attribution> {
    let d = check_inputs(x, background)?;
    if class >= ensemble.n_classes {
        return Err(Error::invalid(format!("class index {class} out of range")));
    }
    let fact = factorials(d);
    let per_bg: Vec<(Vec<f64>, f64)> = background
        .par_iter()
        .map(|b| {
            let mut phi = vec![0.0; d];
            let mut tree_phi = vec![0.0; d];
            let mut base = ensemble.base[class];
            for (t, tree) in ensemble.trees.iter().enumerate() {
                if !ensemble.contributes_to(t, class) {
                    continue;
                }
                let w = ensemble.weights[t];
                let leaf_value = |leaf: &[f64]| w * ensemble.leaf_contribution(t, leaf, class).unwrap_or(0.0);
                base += leaf_value(tree.predict(b));
                let mut walk = Walk {
                    tree,
                    x,
                    b,
                    side: vec![Side::None; d],
                    fact: &fact,
                };
                // per-tree buffer keeps the sum over members linear in each tree
                tree_phi.iter_mut().for_each(|v| *v = 0.0);
                walk.go(0, 0, 0, &leaf_value, &mut tree_phi);
                phi.iter_mut().zip(&tree_phi).for_each(|(a, v)| *a += v);
            }
            (phi, base)
        })
        .collect();
    let n = background.len() as f64;
    let mut phi = vec![0.0; d];
    let mut base_value = 0.0;
    for (p, b) in &per_bg {
        phi.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        base_value += b;
    }
    phi.iter_mut().for_each(|v| *v /= n);
    Ok(Attribution {
        base_value: base_value / n,
        value: ensemble.score(x, class),
        phi,
        class: None,
        instance: None,
    })
}
