//! Gradient-boosted trees on the softmax cross-entropy.
//!
//! Each round fits one regression tree per class to the first and second
//! derivatives of the loss (`g = p - y`, `h = p (1 - p)`), with leaf weight
//! `-eta * G / (H + lambda)`. Splits are found level by level with the
//! exact greedy algorithm over presorted columns.

use rayon::prelude::*;

use super::tree::{midpoint, softmax, Columns, EnsembleOutput, Node, Tree, TreeEnsemble};
use super::{ModelSpec, TrainingSet};

/// Splits must improve the regularized objective by more than this.
const MIN_GAIN: f64 = 1e-6;
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GradParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub eta: f64,
}

impl GradParams {
    fn from_spec(spec: &ModelSpec) -> Self {
        GradParams {
            max_depth: spec.max_depth,
            lambda: spec.l2,
            min_child_weight: spec.min_child_weight,
            eta: spec.learning_rate,
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.lambda)
    }
}

/// Row indices of each column in ascending value order (ties by row).
pub(crate) fn presort(data: &Columns<'_>) -> Vec<Vec<u32>> {
    data.cols
        .par_iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..c.len() as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const NONE: usize = usize::MAX;

pub(crate) fn grow_gradient_tree(
    data: &Columns<'_>,
    order: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    p: GradParams,
) -> Tree {
    let n = data.n_rows;
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut sums = vec![(g.iter().sum::<f64>(), h.iter().sum::<f64>())];
    let mut pos = vec![0usize; n];
    let mut frontier = vec![0usize];

    let mut depth = 0;
    while !frontier.is_empty() {
        let mut splits: Vec<Option<Best>> = vec![None; frontier.len()];
        if depth < p.max_depth {
            let mut slot = vec![NONE; nodes.len()];
            for (s, &id) in frontier.iter().enumerate() {
                slot[id] = s;
            }
            let per_feature: Vec<Vec<Option<Best>>> = (0..data.n_features())
                .into_par_iter()
                .map(|f| scan_feature(data, &order[f], f, g, h, &pos, &slot, &frontier, &sums, p))
                .collect();
            for found in per_feature {
                for (s, b) in found.into_iter().enumerate() {
                    if let Some(b) = b {
                        if splits[s].is_none_or(|cur| b.gain > cur.gain) {
                            splits[s] = Some(b);
                        }
                    }
                }
            }
        }

        let mut next = Vec::new();
        let mut child_of = vec![(NONE, NONE); nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            let (gs, hs) = sums[id];
            match splits[s] {
                Some(b) if b.gain > MIN_GAIN => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: Vec::new() });
                    nodes.push(Node::Leaf { value: Vec::new() });
                    sums.push((0.0, 0.0));
                    sums.push((0.0, 0.0));
                    nodes[id] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right,
                    };
                    child_of.resize(nodes.len(), (NONE, NONE));
                    child_of[id] = (left, right);
                    next.push(left);
                    next.push(right);
                }
                _ => {
                    nodes[id] = Node::Leaf {
                        value: vec![-p.eta * gs / (hs + p.lambda)],
                    };
                }
            }
        }
        for r in 0..n {
            let id = pos[r];
            if id == NONE {
                continue;
            }
            let (l, rt) = child_of[id];
            if l == NONE {
                pos[r] = NONE;
                continue;
            }
            let Node::Split { feature, threshold, .. } = nodes[id] else {
                unreachable!()
            };
            let c = if data.get(r, feature) <= threshold { l } else { rt };
            pos[r] = c;
            sums[c].0 += g[r];
            sums[c].1 += h[r];
        }
        frontier = next;
        depth += 1;
    }
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    data: &Columns<'_>,
    order: &[u32],
    f: usize,
    g: &[f64],
    h: &[f64],
    pos: &[usize],
    slot: &[usize],
    frontier: &[usize],
    sums: &[(f64, f64)],
    p: GradParams,
) -> Vec<Option<Best>> {
    let k = frontier.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last = vec![f64::NAN; k];
    let mut best: Vec<Option<Best>> = vec![None; k];
    let col = &data.cols[f];
    for &r in order {
        let r = r as usize;
        let id = pos[r];
        if id == NONE {
            continue;
        }
        let s = slot[id];
        if s == NONE {
            continue;
        }
        let x = col[r];
        if !last[s].is_nan() && x != last[s] {
            let (gt, ht) = sums[id];
            let (gr, hr) = (gt - gl[s], ht - hl[s]);
            if hl[s] >= p.min_child_weight && hr >= p.min_child_weight {
                let gain = 0.5 * (p.score(gl[s], hl[s]) + p.score(gr, hr) - p.score(gt, ht));
                if best[s].is_none_or(|b| gain > b.gain) {
                    best[s] = Some(Best {
                        gain,
                        feature: f,
                        threshold: midpoint(last[s], x),
                    });
                }
            }
        }
        gl[s] += g[r];
        hl[s] += h[r];
        last[s] = x;
    }
    best
}

pub(crate) fn train_xgb(spec: &ModelSpec, data: &TrainingSet) -> TreeEnsemble {
    let p = GradParams::from_spec(spec);
    let k = data.n_classes;
    let n = data.n_rows();
    let cols = data.columns();
    let order = presort(&cols);
    let mut margins = vec![vec![0.0; k]; n];
    let mut trees = Vec::with_capacity(spec.n_estimators * k);
    let mut targets = Vec::with_capacity(spec.n_estimators * k);
    for _ in 0..spec.n_estimators {
        let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
        let round: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let (g, h): (Vec<f64>, Vec<f64>) = (0..n)
                    .map(|i| {
                        let pi = probs[i][c];
                        let y = if data.y[i] == c { 1.0 } else { 0.0 };
                        (pi - y, (pi * (1.0 - pi)).max(MIN_HESSIAN))
                    })
                    .unzip();
                grow_gradient_tree(&cols, &order, &g, &h, p)
            })
            .collect();
        for (c, tree) in round.into_iter().enumerate() {
            for (i, m) in margins.iter_mut().enumerate() {
                m[c] += tree.predict(&data.rows[i])[0];
            }
            trees.push(tree);
            targets.push(Some(c));
        }
    }
    TreeEnsemble {
        n_classes: k,
        base: vec![0.0; k],
        weights: vec![1.0; trees.len()],
        targets,
        trees,
        output: EnsembleOutput::SoftmaxMargin,
    }
}
