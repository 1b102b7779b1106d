use rayon::prelude::*;

use super::{check_inputs, coalition_value, Attribution, Scorer};
use crate::error::{Error, Result};

/// Largest feature count the enumeration accepts.
pub const EXACT_MAX_FEATURES: usize = 15;

/// `|S|! (d - |S| - 1)! / d!` for every coalition size `|S| < d`.
pub(crate) fn shapley_weights(d: usize) -> Vec<f64> {
    // 1 / (d * C(d-1, s))
    let mut w = Vec::with_capacity(d);
    let mut binom = 1.0;
    for s in 0..d {
        w.push(1.0 / (d as f64 * binom));
        binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Shapley values by full enumeration of the interventional value function
/// `v(S) = mean_b f(x on S, b off S)`.
pub fn exact_shapley<S: Scorer + ?Sized>(f: &S, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution> {
    let d = check_inputs(x, background)?;
    if d > EXACT_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            method: "exact Shapley enumeration",
            max: EXACT_MAX_FEATURES,
            actual: d,
        });
    }
    let values: Vec<f64> = (0..1u32 << d)
        .into_par_iter()
        .map(|mask| coalition_value(f, x, background, |j| mask >> j & 1 == 1))
        .collect();
    let w = shapley_weights(d);
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << d {
            if mask & bit == 0 {
                *p += w[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(Attribution {
        base_value: values[0],
        value: values[(1usize << d) - 1],
        phi,
        class: None,
        instance: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.5], vec![2.0, 0.0, -1.0]]
    }

    #[test]
    fn weights_sum_over_coalitions_to_one() {
        for d in 1..10 {
            let w = shapley_weights(d);
            // sum_s C(d-1, s) w_s = 1
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                total += binom * ws;
                binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_model_gives_centered_terms() {
        let g1 = |v: f64| v * v;
        let g2 = |v: f64| 3.0 * v;
        let f = |r: &[f64]| g1(r[0]) + g2(r[1]);
        let x = [1.5, 2.0, 7.0];
        let a = exact_shapley(&f, &x, &bg()).unwrap();
        let m1 = bg().iter().map(|b| g1(b[0])).sum::<f64>() / 3.0;
        let m2 = bg().iter().map(|b| g2(b[1])).sum::<f64>() / 3.0;
        assert!((a.phi[0] - (g1(1.5) - m1)).abs() < 1e-12);
        assert!((a.phi[1] - (g2(2.0) - m2)).abs() < 1e-12);
        assert_eq!(a.phi[2], 0.0);
    }

    #[test]
    fn symmetry_and_local_accuracy() {
        let f = |r: &[f64]| r[0] + r[1] + r[0] * r[1];
        let x = [2.0, 2.0, 0.0];
        let bg = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]];
        let a = exact_shapley(&f, &x, &bg).unwrap();
        assert!((a.phi[0] - a.phi[1]).abs() < 1e-12);
        assert!((a.base_value + a.phi.iter().sum::<f64>() - f(&x)).abs() < 1e-12);
    }

    #[test]
    fn too_many_features_is_refused() {
        let f = |r: &[f64]| r[0];
        let x = vec![0.0; 16];
        assert!(matches!(
            exact_shapley(&f, &x, &[vec![0.0; 16]]),
            Err(Error::TooManyFeatures { max: 15, actual: 16, .. })
        ));
    }
}
