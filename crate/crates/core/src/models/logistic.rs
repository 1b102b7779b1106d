use serde::{Deserialize, Serialize};

use super::tree::softmax;
use super::{ModelSpec, Standardizer, TrainingSet};

/// Multinomial logistic regression on standardized inputs, fitted by L-BFGS
/// on the mean cross-entropy plus `l2 / 2 * |W|^2` (bias unpenalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub standardizer: Standardizer,
    /// `weights[c][j]`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const HISTORY: usize = 10;
const GRAD_TOL: f64 = 1e-7;

struct Problem<'a> {
    z: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    d: usize,
    l2: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.k * (self.d + 1)
    }

    /// Loss and gradient at `theta` = row-major W followed by b.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (k, d) = (self.k, self.d);
        let n = self.z.len() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut logits = vec![0.0; k];
        for (x, &yi) in self.z.iter().zip(self.y) {
            for c in 0..k {
                let w = &theta[c * d..(c + 1) * d];
                logits[c] = theta[k * d + c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            loss += lse - logits[yi];
            for c in 0..k {
                let r = (logits[c] - lse).exp() - if c == yi { 1.0 } else { 0.0 };
                for (g, xj) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *g += r * xj;
                }
                grad[k * d + c] += r;
            }
        }
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        let mut penalty = 0.0;
        for i in 0..k * d {
            penalty += theta[i] * theta[i];
            grad[i] += self.l2 * theta[i];
        }
        loss + 0.5 * self.l2 * penalty
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes with L-BFGS and a backtracking Armijo line search. Returns the
/// iteration count and whether the gradient tolerance was met.
fn lbfgs(p: &Problem<'_>, theta: &mut [f64], max_iter: usize) -> (usize, bool) {
    let dim = p.dim();
    let mut g = vec![0.0; dim];
    let mut f = p.eval(theta, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut g_new = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    for it in 0..max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < GRAD_TOL {
            return (it, true);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alpha = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &q);
            q.iter_mut().zip(&y_hist[i]).for_each(|(qj, yj)| *qj -= alpha[i] * yj);
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / g.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for i in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            q.iter_mut().zip(&s_hist[i]).for_each(|(qj, sj)| *qj += (alpha[i] - beta) * sj);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            trial.iter_mut().zip(theta.iter().zip(&dir)).for_each(|(t, (x, dx))| *t = x + step * dx);
            let ft = p.eval(&trial, &mut g_new);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            return (it, false);
        };
        let s: Vec<f64> = trial.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        theta.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        let done = (f - ft).abs() <= 1e-15 * f.abs().max(1.0);
        f = ft;
        if done {
            return (it + 1, true);
        }
    }
    (max_iter, false)
}

impl Logistic {
    pub(crate) fn fit(spec: &ModelSpec, data: &TrainingSet) -> Self {
        let standardizer = Standardizer::fit(&data.rows);
        let z: Vec<Vec<f64>> = data.rows.iter().map(|r| standardizer.apply(r)).collect();
        let (k, d) = (data.n_classes, data.n_features());
        let problem = Problem {
            z: &z,
            y: &data.y,
            k,
            d,
            l2: spec.l2,
        };
        let mut theta = vec![0.0; problem.dim()];
        let (iterations, converged) = lbfgs(&problem, &mut theta, spec.max_iterations);
        if !converged {
            log::warn!("LR stopped after {iterations} iterations without converging");
        }
        Logistic {
            standardizer,
            weights: (0..k).map(|c| theta[c * d..(c + 1) * d].to_vec()).collect(),
            bias: theta[k * d..].to_vec(),
            iterations,
            converged,
        }
    }

    pub fn logits(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardizer.apply(row);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + dot(w, &z))
            .collect()
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits(row))
    }
}
