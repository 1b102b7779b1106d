//! Binary decision trees and weighted tree ensembles.
//!
//! A split sends a row left when `row[feature] <= threshold`. Leaves hold
//! either a class-score vector or, for boosting trees, a single value that
//! contributes to one class.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub(crate) fn map_leaves(&mut self, mut f: impl FnMut(&mut Vec<f64>)) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                f(value);
            }
        }
    }
}

/// How ensemble scores relate to class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleOutput {
    /// Scores are already probabilities (averaged leaf distributions).
    Probability,
    /// Scores are margins; probabilities are their softmax.
    SoftmaxMargin,
    /// Scores are normalized weighted votes; they double as probabilities.
    WeightedVote,
}

/// `score_c(x) = base_c + sum_t weight_t * leaf_t(x)[c]`, where a tree with a
/// target class contributes its scalar leaf to that class only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_classes: usize,
    pub base: Vec<f64>,
    pub trees: Vec<Tree>,
    pub weights: Vec<f64>,
    pub targets: Vec<Option<usize>>,
    pub output: EnsembleOutput,
}

impl TreeEnsemble {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// The leaf value a tree contributes to `class`, if it contributes at all.
    pub fn leaf_contribution(&self, tree: usize, leaf: &[f64], class: usize) -> Option<f64> {
        match self.targets[tree] {
            Some(k) if k == class => Some(leaf[0]),
            Some(_) => None,
            None => Some(leaf[class]),
        }
    }

    pub fn contributes_to(&self, tree: usize, class: usize) -> bool {
        self.targets[tree].is_none_or(|k| k == class)
    }

    pub fn score(&self, row: &[f64], class: usize) -> f64 {
        let mut s = self.base[class];
        for (t, tree) in self.trees.iter().enumerate() {
            if !self.contributes_to(t, class) {
                continue;
            }
            let leaf = tree.predict(row);
            if let Some(v) = self.leaf_contribution(t, leaf, class) {
                s += self.weights[t] * v;
            }
        }
        s
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.base.clone();
        for (t, tree) in self.trees.iter().enumerate() {
            let leaf = tree.predict(row);
            let w = self.weights[t];
            match self.targets[t] {
                Some(k) => s[k] += w * leaf[0],
                None => s.iter_mut().zip(leaf).for_each(|(a, b)| *a += w * b),
            }
        }
        s
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let s = self.scores(row);
        match self.output {
            EnsembleOutput::SoftmaxMargin => softmax(&s),
            EnsembleOutput::Probability | EnsembleOutput::WeightedVote => s,
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CartParams {
    pub max_depth: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
    /// Extremely randomized trees: one uniform threshold per candidate feature.
    pub random_thresholds: bool,
}

/// Column-major training data shared by the tree builders.
pub(crate) struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
    pub n_rows: usize,
}

impl Columns<'_> {
    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, f: usize) -> f64 {
        self.cols[f][row]
    }
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn gini_sum(counts: &[f64], total: f64) -> f64 {
    // total * gini = total - sum(c^2) / total
    if total <= 0.0 {
        return 0.0;
    }
    total - counts.iter().map(|c| c * c).sum::<f64>() / total
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Grows a weighted-Gini CART tree. Rows with zero weight are ignored. Leaves
/// hold the weighted class distribution of their rows.
pub(crate) fn grow_cart(
    data: &Columns<'_>,
    labels: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: CartParams,
    rng: &mut Rng,
) -> Tree {
    let rows: Vec<usize> = (0..data.n_rows).filter(|&i| weights[i] > 0.0).collect();
    let mut tree = Tree { nodes: Vec::new() };
    let mut builder = CartBuilder {
        data,
        labels,
        weights,
        n_classes,
        params,
        rng,
    };
    builder.grow(&mut tree, rows, 0);
    tree
}

struct CartBuilder<'a, 'b> {
    data: &'a Columns<'b>,
    labels: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    params: CartParams,
    rng: &'a mut Rng,
}

impl CartBuilder<'_, '_> {
    fn class_weights(&self, rows: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &r in rows {
            c[self.labels[r]] += self.weights[r];
        }
        c
    }

    fn grow(&mut self, tree: &mut Tree, rows: Vec<usize>, depth: usize) -> usize {
        let id = tree.nodes.len();
        let counts = self.class_weights(&rows);
        let total: f64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let split = if pure || depth >= self.params.max_depth || rows.len() < 2 {
            None
        } else {
            self.best_split(&rows, &counts, total)
        };
        let Some(split) = split else {
            let value = if total > 0.0 {
                counts.iter().map(|c| c / total).collect()
            } else {
                vec![1.0 / self.n_classes as f64; self.n_classes]
            };
            tree.nodes.push(Node::Leaf { value });
            return id;
        };
        tree.nodes.push(Node::Leaf { value: Vec::new() });
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.data.get(i, split.feature) <= split.threshold);
        let left = self.grow(tree, l, depth + 1);
        let right = self.grow(tree, r, depth + 1);
        tree.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_order(&mut self) -> Vec<usize> {
        let d = self.data.n_features();
        let mut order: Vec<usize> = (0..d).collect();
        if self.params.max_features.is_some_and(|m| m < d) || self.params.random_thresholds {
            for i in (1..d).rev() {
                let j = self.rng.random_range(0..=i);
                order.swap(i, j);
            }
        }
        order
    }

    fn best_split(&mut self, rows: &[usize], counts: &[f64], total: f64) -> Option<Candidate> {
        let d = self.data.n_features();
        let budget = self.params.max_features.unwrap_or(d).clamp(1, d);
        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        let mut values: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in self.candidate_order() {
            if examined >= budget {
                break;
            }
            values.clear();
            values.extend(rows.iter().map(|&r| (self.data.get(r, f), r)));
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v)));
            if lo >= hi {
                // constant here; does not count towards the feature budget
                continue;
            }
            examined += 1;
            let found = if self.params.random_thresholds {
                let mut t = self.rng.random_range(lo..hi);
                if t >= hi {
                    t = lo;
                }
                let mut left = vec![0.0; self.n_classes];
                for &(v, r) in &values {
                    if v <= t {
                        left[self.labels[r]] += self.weights[r];
                    }
                }
                let wl: f64 = left.iter().sum();
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                Some((t, gini_sum(&left, wl) + gini_sum(&right, total - wl)))
            } else {
                self.best_threshold(&mut values, counts, total)
            };
            if let Some((threshold, impurity)) = found {
                let better = match &best {
                    None => true,
                    Some(b) => impurity < b.impurity || (impurity == b.impurity && f < b.feature),
                };
                if better {
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn best_threshold(&self, values: &mut [(f64, usize)], counts: &[f64], total: f64) -> Option<(f64, f64)> {
        values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut left = vec![0.0; self.n_classes];
        let mut wl = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..values.len() - 1 {
            let (v, r) = values[i];
            let w = self.weights[r];
            left[self.labels[r]] += w;
            wl += w;
            let next = values[i + 1].0;
            if v == next {
                continue;
            }
            let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
            let imp = gini_sum(&left, wl) + gini_sum(&right, total - wl);
            if best.is_none_or(|(_, b)| imp < b) {
                best = Some((midpoint(v, next), imp));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cols(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    }

    #[test]
    fn xor_is_learned_with_depth_two() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = [0, 0, 1, 1];
        let c = cols(&rows);
        let data = Columns { cols: &c, n_rows: 4 };
        let params = CartParams {
            max_depth: 2,
            max_features: None,
            random_thresholds: false,
        };
        let tree = grow_cart(&data, &labels, &[1.0; 4], 2, params, &mut rng::rng(0));
        for (r, &y) in rows.iter().zip(&labels) {
            assert_eq!(argmax(tree.predict(r)), y);
        }
        assert!(tree.depth() <= 2);
        // root: lowest feature wins the tie
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn depth_one_stump_cannot_solve_xor() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let c = cols(&rows);
        let data = Columns { cols: &c, n_rows: 4 };
        let params = CartParams {
            max_depth: 1,
            max_features: None,
            random_thresholds: false,
        };
        let tree = grow_cart(&data, &[0, 0, 1, 1], &[1.0; 4], 2, params, &mut rng::rng(0));
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.predict(&rows[0]), &[0.5, 0.5]);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let c = cols(&rows);
        let data = Columns { cols: &c, n_rows: 3 };
        let params = CartParams {
            max_depth: 5,
            max_features: None,
            random_thresholds: false,
        };
        let tree = grow_cart(&data, &[0, 1, 1], &[0.0, 1.0, 2.0], 2, params, &mut rng::rng(0));
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[0.0]), &[0.0, 1.0]);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
