//! Kernel SHAP: a Shapley-kernel weighted least-squares fit over coalitions,
//! constrained so the attributions sum to `f(x) - base`.
//!
//! When the sample budget covers every proper coalition the design is
//! enumerated and the solution is the exact Shapley vector. Otherwise
//! coalition sizes whose full enumeration fits the budget are enumerated
//! (smallest and largest sizes first, in complementary pairs) and the rest
//! is filled by paired random sampling.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use super::{check_inputs, coalition_value, Attribution, Scorer};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

type Mask = u128;
const MAX_FEATURES: usize = 128;

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of one coalition of size `s`.
fn kernel_weight(d: usize, s: usize) -> f64 {
    (d - 1) as f64 / (binom(d, s) * s as f64 * (d - s) as f64)
}

#[derive(Default)]
struct Design {
    masks: Vec<Mask>,
    weights: Vec<f64>,
    index: HashMap<Mask, usize>,
}

impl Design {
    fn add(&mut self, mask: Mask, w: f64) {
        if let Some(&i) = self.index.get(&mask) {
            self.weights[i] += w;
        } else {
            self.index.insert(mask, self.masks.len());
            self.masks.push(mask);
            self.weights.push(w);
        }
    }
}

fn full_mask(d: usize) -> Mask {
    if d == MAX_FEATURES {
        Mask::MAX
    } else {
        (1 << d) - 1
    }
}

fn full_design(d: usize) -> Design {
    let mut design = Design::default();
    for mask in 1..full_mask(d) {
        design.add(mask, kernel_weight(d, mask.count_ones() as usize));
    }
    design
}

/// Calls `f` for every size-`s` subset of `0..d`, in lexicographic order.
fn for_each_subset(d: usize, s: usize, f: &mut impl FnMut(Mask)) {
    fn go(start: usize, d: usize, left: usize, mask: Mask, f: &mut impl FnMut(Mask)) {
        if left == 0 {
            f(mask);
            return;
        }
        for j in start..=d - left {
            go(j + 1, d, left - 1, mask | (1 << j), f);
        }
    }
    go(0, d, s, 0, f);
}

fn random_subset(d: usize, s: usize, r: &mut Rng) -> Mask {
    let mut idx: Vec<usize> = (0..d).collect();
    let mut mask = 0;
    for i in 0..s {
        let j = r.random_range(i..d);
        idx.swap(i, j);
        mask |= 1 << idx[i];
    }
    mask
}

fn sampled_design(d: usize, n_samples: usize, r: &mut Rng) -> Design {
    let full = full_mask(d);
    let n_sizes = d / 2; // ceil((d - 1) / 2)
    let n_paired = (d - 1) / 2;
    let mut size_weight: Vec<f64> = (1..=n_sizes)
        .map(|s| {
            let w = (d - 1) as f64 / (s * (d - s)) as f64;
            if s <= n_paired {
                2.0 * w
            } else {
                w
            }
        })
        .collect();
    let total: f64 = size_weight.iter().sum();
    size_weight.iter_mut().for_each(|w| *w /= total);

    let mut design = Design::default();
    let mut left = n_samples;
    let mut n_full = 0;
    let mut remaining = size_weight.clone();
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let count = binom(d, s) * if paired { 2.0 } else { 1.0 };
        if remaining[s - 1] * left as f64 / count < 1.0 - 1e-8 {
            break;
        }
        n_full += 1;
        left -= count as usize;
        if remaining[s - 1] < 1.0 {
            let scale = 1.0 - remaining[s - 1];
            remaining.iter_mut().for_each(|w| *w /= scale);
        }
        let w = size_weight[s - 1] / count;
        for_each_subset(d, s, &mut |m| {
            design.add(m, w);
            if paired {
                design.add(full ^ m, w);
            }
        });
    }
    if n_full == n_sizes || left == 0 {
        return design;
    }

    let weight_left: f64 = size_weight[n_full..].iter().sum();
    let probs: Vec<f64> = {
        let p = &size_weight[n_full..];
        let t: f64 = p.iter().sum();
        p.iter().map(|w| w / t).collect()
    };
    let mut sampled = Design::default();
    let mut draws = 0;
    while left > 0 && draws < 100 * n_samples {
        draws += 1;
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut k = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        let s = n_full + k + 1;
        let m = random_subset(d, s, r);
        let fresh = !sampled.index.contains_key(&m);
        sampled.add(m, 1.0);
        if fresh {
            left -= 1;
        }
        if left > 0 && s <= n_paired {
            let c = full ^ m;
            let fresh = !sampled.index.contains_key(&c);
            sampled.add(c, 1.0);
            if fresh {
                left -= 1;
            }
        }
    }
    let t: f64 = sampled.weights.iter().sum();
    for (m, w) in sampled.masks.iter().zip(&sampled.weights) {
        design.add(*m, w * weight_left / t);
    }
    design
}

/// Constrained weighted least squares: `phi_{d-1}` is eliminated using
/// `sum(phi) = delta`, the rest solved by SVD.
fn solve(design: &Design, y: &[f64], d: usize, delta: f64) -> Result<Vec<f64>> {
    let n = design.masks.len();
    let last = 1 << (d - 1);
    let a = DMatrix::from_fn(n, d - 1, |i, j| {
        let m = design.masks[i];
        let zj = (m >> j & 1) as f64;
        let zl = if m & last != 0 { 1.0 } else { 0.0 };
        design.weights[i].sqrt() * (zj - zl)
    });
    let b = DVector::from_fn(n, |i, _| {
        let zl = if design.masks[i] & last != 0 { 1.0 } else { 0.0 };
        design.weights[i].sqrt() * (y[i] - zl * delta)
    });
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(Error::Singular(format!(
            "coalition design has rank < {} ({} coalitions)",
            d - 1,
            n
        )));
    }
    let sol = svd.solve(&b, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok(phi)
}

/// Kernel SHAP with `n_samples` coalitions (at least `2d + 2`).
pub fn kernel_shap<S: Scorer + ?Sized>(
    f: &S,
    x: &[f64],
    background: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    let d = check_inputs(x, background)?;
    if d > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            method: "kernel SHAP",
            max: MAX_FEATURES,
            actual: d,
        });
    }
    if n_samples < 2 * d + 2 {
        return Err(Error::invalid(format!(
            "kernel SHAP needs at least {} samples for {d} features, got {n_samples}",
            2 * d + 2
        )));
    }
    let base_value = coalition_value(f, x, background, |_| false);
    let value = f.score(x);
    let delta = value - base_value;
    if d == 1 {
        return Ok(Attribution {
            base_value,
            value,
            phi: vec![delta],
            class: None,
            instance: None,
        });
    }
    let enumerate = d < 64 && (n_samples as u128) + 2 >= 1u128 << d;
    let evaluate = |design: &Design| -> Vec<f64> {
        design
            .masks
            .par_iter()
            .map(|&m| coalition_value(f, x, background, |j| m >> j & 1 == 1) - base_value)
            .collect()
    };
    let phi = if enumerate {
        let design = full_design(d);
        solve(&design, &evaluate(&design), d, delta)?
    } else {
        let mut r = rng::rng(seed);
        let design = sampled_design(d, n_samples, &mut r);
        match solve(&design, &evaluate(&design), d, delta) {
            Ok(p) => p,
            Err(Error::Singular(_)) => {
                log::warn!("kernel SHAP design was singular; resampling once");
                let design = sampled_design(d, n_samples, &mut r);
                solve(&design, &evaluate(&design), d, delta)?
            }
            Err(e) => return Err(e),
        }
    };
    Ok(Attribution {
        base_value,
        value,
        phi,
        class: None,
        instance: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xai::exact_shapley;

    fn rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::rng(seed);
        (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
    }

    fn nonlinear(r: &[f64]) -> f64 {
        r[0] * r[1] + (r[2] > 0.2) as i32 as f64 * r[3] + r[4].sin() - 0.5 * r[5] * r[6] * r[7]
    }

    #[test]
    fn full_enumeration_reproduces_exact_values() {
        let bg = rows(12, 8, 1);
        for x in rows(5, 8, 2) {
            let k = kernel_shap(&nonlinear, &x, &bg, 256, 0).unwrap();
            let e = exact_shapley(&nonlinear, &x, &bg).unwrap();
            for (a, b) in k.phi.iter().zip(&e.phi) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn sampled_design_is_close_and_deterministic() {
        let bg = rows(10, 10, 3);
        let x = rows(1, 10, 4).remove(0);
        let e = exact_shapley(&nonlinear, &x, &bg).unwrap();
        let a = kernel_shap(&nonlinear, &x, &bg, 600, 9).unwrap();
        let b = kernel_shap(&nonlinear, &x, &bg, 600, 9).unwrap();
        assert_eq!(a.phi, b.phi);
        let sum: f64 = a.phi.iter().sum();
        assert!((a.base_value + sum - a.value).abs() < 1e-9);
        let err = a.phi.iter().zip(&e.phi).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn constant_function_gets_zero() {
        let bg = rows(4, 9, 5);
        let x = rows(1, 9, 6).remove(0);
        let a = kernel_shap(&|_: &[f64]| 3.0, &x, &bg, 100, 1).unwrap();
        assert!(a.phi.iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn sample_budget_is_checked() {
        let bg = rows(2, 5, 5);
        let x = rows(1, 5, 6).remove(0);
        assert!(kernel_shap(&nonlinear_small, &x, &bg, 11, 0).is_err());
        assert!(kernel_shap(&nonlinear_small, &x, &bg, 12, 0).is_ok());
    }

    fn nonlinear_small(r: &[f64]) -> f64 {
        r[0] * r[1] + r[4]
    }

    #[test]
    fn sampled_design_weights_are_kernel_weights_when_enumerated() {
        // d = 6 with a budget that fits sizes 1 and 5 but not 2..4
        let mut r = rng::rng(0);
        let design = sampled_design(6, 40, &mut r);
        let singles: Vec<f64> = design
            .masks
            .iter()
            .zip(&design.weights)
            .filter(|(m, _)| m.count_ones() == 1)
            .map(|(_, w)| *w)
            .collect();
        assert_eq!(singles.len(), 6);
        let ratio = singles[0] / kernel_weight(6, 1);
        for w in singles {
            assert!((w / kernel_weight(6, 1) - ratio).abs() < 1e-12);
        }
    }
}
