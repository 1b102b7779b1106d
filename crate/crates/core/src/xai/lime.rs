//! LIME with a quartile discretizer.
//!
//! Perturbations are drawn per feature: a quartile bin by its training
//! frequency, then a value uniformly inside that bin. The interpretable
//! representation marks which features landed in the explained row's own
//! bin, and a weighted ridge fit on it gives one weight per condition.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::error::{Error, Result};
use crate::rng;

pub const LIME_DEFAULT_K: usize = 10;
pub const LIME_DEFAULT_SAMPLES: usize = 5000;
const KERNEL_WIDTH_FACTOR: f64 = 0.75;
const RIDGE: f64 = 1.0;

/// Linear-interpolated percentile of sorted data (`p` in 0..=100).
pub(crate) fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub name: String,
    /// Distinct quartile boundaries, ascending. Bin `i` is
    /// `(boundaries[i-1], boundaries[i]]`, open-ended at both extremes.
    pub boundaries: Vec<f64>,
    /// Training frequency of each bin.
    pub frequencies: Vec<f64>,
    /// Sampling range of each bin (training min and max close the ends).
    pub ranges: Vec<(f64, f64)>,
}

impl FeatureBins {
    pub fn bin(&self, v: f64) -> usize {
        self.boundaries.partition_point(|b| *b < v)
    }

    pub fn n_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// A constant training column yields a single usable bin.
    pub fn is_degenerate(&self) -> bool {
        self.frequencies.iter().filter(|&&f| f > 0.0).count() < 2
    }

    pub fn condition(&self, bin: usize) -> (Option<f64>, Option<f64>) {
        let lower = bin.checked_sub(1).map(|i| self.boundaries[i]);
        let upper = self.boundaries.get(bin).copied();
        (lower, upper)
    }
}

/// Renders `name <= q1`, `q1 < name <= q2` or `name > q3`.
pub fn render_condition(name: &str, lower: Option<f64>, upper: Option<f64>) -> String {
    match (lower, upper) {
        (None, Some(u)) => format!("{name} <= {u:.2}"),
        (Some(l), Some(u)) => format!("{l:.2} < {name} <= {u:.2}"),
        (Some(l), None) => format!("{name} > {l:.2}"),
        (None, None) => name.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileDiscretizer {
    pub features: Vec<FeatureBins>,
}

impl QuartileDiscretizer {
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("discretizer needs training rows"));
        }
        let d = names.len();
        let mut features = Vec::with_capacity(d);
        for (j, name) in names.iter().enumerate() {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let mut boundaries: Vec<f64> = [25.0, 50.0, 75.0].iter().map(|&p| percentile(&col, p)).collect();
            boundaries.dedup();
            let mut bins = FeatureBins {
                name: name.clone(),
                boundaries,
                frequencies: Vec::new(),
                ranges: Vec::new(),
            };
            let k = bins.n_bins();
            let mut counts = vec![0.0; k];
            for v in &col {
                counts[bins.bin(*v)] += 1.0;
            }
            let (lo, hi) = (col[0], col[col.len() - 1]);
            bins.ranges = (0..k)
                .map(|b| {
                    let (l, u) = bins.condition(b);
                    (l.unwrap_or(lo), u.unwrap_or(hi).max(l.unwrap_or(lo)))
                })
                .collect();
            bins.frequencies = counts.iter().map(|c| c / col.len() as f64).collect();
            features.push(bins);
        }
        Ok(QuartileDiscretizer { features })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeCondition {
    pub feature: usize,
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub weight: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    /// Highest |weight| first.
    pub conditions: Vec<LimeCondition>,
    pub intercept: f64,
    /// Weighted R² of the local ridge fit.
    pub score: f64,
    /// The black-box output at the explained row.
    pub value: f64,
}

impl LimeExplanation {
    /// Dense per-feature weights (0 for features without a condition).
    pub fn weights(&self, d: usize) -> Vec<f64> {
        let mut w = vec![0.0; d];
        for c in &self.conditions {
            w[c.feature] = c.weight;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimeConfig {
    pub k: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            k: LIME_DEFAULT_K,
            n_samples: LIME_DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

pub fn lime_explain<S: Scorer + ?Sized>(
    f: &S,
    x: &[f64],
    disc: &QuartileDiscretizer,
    config: LimeConfig,
) -> Result<LimeExplanation> {
    let d = disc.n_features();
    if x.len() != d {
        return Err(Error::WidthMismatch {
            expected: d,
            actual: x.len(),
        });
    }
    if config.n_samples < 2 {
        return Err(Error::invalid("LIME needs at least 2 perturbation samples"));
    }
    let usable: Vec<usize> = (0..d).filter(|&j| !disc.features[j].is_degenerate()).collect();
    let value = f.score(x);
    if usable.is_empty() {
        return Ok(LimeExplanation {
            conditions: Vec::new(),
            intercept: value,
            score: 0.0,
            value,
        });
    }
    let x_bins: Vec<usize> = (0..d).map(|j| disc.features[j].bin(x[j])).collect();
    let mut r = rng::rng(config.seed);

    let u = usable.len();
    let n = config.n_samples;
    let mut z = DMatrix::<f64>::zeros(n, u);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(n);
    let width = KERNEL_WIDTH_FACTOR * (u as f64).sqrt();
    let mut sample = x.to_vec();
    for i in 0..n {
        if i > 0 {
            for (j, fb) in disc.features.iter().enumerate() {
                if fb.is_degenerate() {
                    sample[j] = x[j];
                    continue;
                }
                let t: f64 = r.random();
                let mut acc = 0.0;
                let mut bin = fb.n_bins() - 1;
                for (b, p) in fb.frequencies.iter().enumerate() {
                    acc += p;
                    if t < acc {
                        bin = b;
                        break;
                    }
                }
                let (lo, hi) = fb.ranges[bin];
                sample[j] = if hi > lo { r.random_range(lo..=hi) } else { lo };
            }
        }
        let mut mismatches = 0.0;
        for (c, &j) in usable.iter().enumerate() {
            let same = disc.features[j].bin(sample[j]) == x_bins[j];
            z[(i, c)] = if same { 1.0 } else { 0.0 };
            if !same {
                mismatches += 1.0;
            }
        }
        y[i] = f.score(&sample);
        w[i] = (-mismatches / (width * width)).exp();
    }

    let (coef, intercept, score) = weighted_ridge(&z, &y, &w, RIDGE)?;
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by(|&a, &b| coef[b].abs().total_cmp(&coef[a].abs()).then(a.cmp(&b)));
    let k = config.k.min(u);
    let conditions = order[..k]
        .iter()
        .map(|&c| {
            let j = usable[c];
            let fb = &disc.features[j];
            let (lower, upper) = fb.condition(x_bins[j]);
            LimeCondition {
                feature: j,
                name: fb.name.clone(),
                lower,
                upper,
                weight: coef[c],
                text: render_condition(&fb.name, lower, upper),
            }
        })
        .collect();
    Ok(LimeExplanation {
        conditions,
        intercept,
        score,
        value,
    })
}

/// Ridge regression with an unpenalized intercept; returns coefficients,
/// intercept and weighted R².
fn weighted_ridge(z: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> Result<(Vec<f64>, f64, f64)> {
    let (n, p) = (z.nrows(), z.ncols());
    let sw: f64 = w.sum();
    let zbar: Vec<f64> = (0..p).map(|j| (0..n).map(|i| w[i] * z[(i, j)]).sum::<f64>() / sw).collect();
    let ybar = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / sw;
    let zc = DMatrix::from_fn(n, p, |i, j| w[i].sqrt() * (z[(i, j)] - zbar[j]));
    let yc = DVector::from_fn(n, |i, _| w[i].sqrt() * (y[i] - ybar));
    let mut gram = zc.transpose() * &zc;
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = zc.transpose() * &yc;
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("LIME ridge system is not positive definite".into()))?
        .solve(&rhs);
    let intercept = ybar - beta.iter().zip(&zbar).map(|(b, m)| b * m).sum::<f64>();
    let resid = &yc - &zc * &beta;
    let ss_res = resid.norm_squared();
    let ss_tot = yc.norm_squared();
    let score = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok((beta.iter().copied().collect(), intercept, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn training(n: usize, d: usize, seed: u64) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut r = rng::rng(seed);
        let names = (0..d).map(|j| format!("f{j}")).collect();
        let rows = (0..n).map(|_| (0..d).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        (names, rows)
    }

    #[test]
    fn percentiles_interpolate_like_numpy() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 25.0), 1.75);
        assert_eq!(percentile(&v, 50.0), 2.5);
        assert_eq!(percentile(&v, 75.0), 3.25);
    }

    #[test]
    fn bins_and_rendering() {
        let names = vec!["Bwd Header Len".to_string()];
        let rows: Vec<Vec<f64>> = (0..=8).map(|i| vec![i as f64 * 40.0]).collect();
        let disc = QuartileDiscretizer::fit(&names, &rows).unwrap();
        let fb = &disc.features[0];
        assert_eq!(fb.boundaries, vec![80.0, 160.0, 240.0]);
        assert_eq!(fb.bin(80.0), 0);
        assert_eq!(fb.bin(80.5), 1);
        assert_eq!(fb.bin(300.0), 3);
        let (l, u) = fb.condition(fb.bin(300.0));
        assert_eq!(render_condition(&fb.name, l, u), "Bwd Header Len > 240.00");
        let (l, u) = fb.condition(1);
        assert_eq!(render_condition(&fb.name, l, u), "80.00 < Bwd Header Len <= 160.00");
        let (l, u) = fb.condition(0);
        assert_eq!(render_condition(&fb.name, l, u), "Bwd Header Len <= 80.00");
    }

    #[test]
    fn single_relevant_feature_is_recovered() {
        let (names, rows) = training(500, 6, 1);
        let disc = QuartileDiscretizer::fit(&names, &rows).unwrap();
        let f = |r: &[f64]| 5.0 * r[3];
        let mut hits = 0;
        let mut rr = rng::rng(2);
        for run in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rr.random_range(0.0..10.0)).collect();
            let cfg = LimeConfig {
                seed: run,
                n_samples: 1000,
                ..LimeConfig::default()
            };
            let e = lime_explain(&f, &x, &disc, cfg).unwrap();
            assert_eq!(e.conditions.len(), 6);
            if e.conditions[0].feature == 3 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn constant_black_box_has_zero_weights() {
        let (names, rows) = training(200, 5, 3);
        let disc = QuartileDiscretizer::fit(&names, &rows).unwrap();
        let e = lime_explain(&|_: &[f64]| 0.7, &rows[0], &disc, LimeConfig::default()).unwrap();
        assert!(e.conditions.iter().all(|c| c.weight.abs() < 1e-6));
    }

    #[test]
    fn constant_features_are_excluded_and_runs_repeat() {
        let (names, mut rows) = training(200, 4, 4);
        rows.iter_mut().for_each(|r| r[2] = 1.0);
        let disc = QuartileDiscretizer::fit(&names, &rows).unwrap();
        assert!(disc.features[2].is_degenerate());
        let f = |r: &[f64]| r[0] + r[2];
        let cfg = LimeConfig {
            seed: 5,
            ..LimeConfig::default()
        };
        let a = lime_explain(&f, &rows[1], &disc, cfg).unwrap();
        assert_eq!(a.conditions.len(), 3);
        assert!(a.conditions.iter().all(|c| c.feature != 2));
        assert_eq!(a, lime_explain(&f, &rows[1], &disc, cfg).unwrap());
    }
}
