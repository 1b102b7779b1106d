//! Faithfulness of explanations: consistency under input noise and
//! sufficiency of the top-k features.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sample_std;
use crate::models::TrainedModel;
use crate::rng::derived_rng;
use crate::stats::{pearson, rank_descending};
use crate::xai::{mean_abs, Attribution, Explainer};

pub const DEFAULT_NOISE_FRAC: f64 = 0.05;
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_TOP_K: usize = 10;
const MIN_ROWS: usize = 10;

/// Anything that yields one attribution vector per (row, class).
pub trait Attributor: Sync {
    fn attribute(&self, model: &TrainedModel, row: &[f64], class: usize, instance: usize) -> Result<Vec<f64>>;
}

impl Attributor for Explainer {
    fn attribute(&self, model: &TrainedModel, row: &[f64], class: usize, instance: usize) -> Result<Vec<f64>> {
        self.explain(model, row, class, instance).map(|a| a.phi)
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho via Pearson on average ranks. Identical rank vectors give
/// exactly 1 (this covers two identical constant series); a constant series
/// against a varying one gives 0.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    if ra == rb {
        return 1.0;
    }
    pearson(&ra, &rb).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessConfig {
    pub noise_frac: f64,
    pub runs: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for FaithfulnessConfig {
    fn default() -> Self {
        FaithfulnessConfig {
            noise_frac: DEFAULT_NOISE_FRAC,
            runs: DEFAULT_RUNS,
            k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub overall: f64,
    /// Per run: Spearman between the original and perturbed mean-|phi| vectors.
    pub per_run: Vec<f64>,
    /// `(feature, mean over runs of the attribution-series Spearman)`.
    pub per_feature: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub overall_consistency: f64,
    pub per_feature_consistency: Vec<(String, f64)>,
    pub sufficiency: f64,
    pub config: FaithfulnessConfig,
}

fn attribute_all<A: Attributor + ?Sized>(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    classes: &[usize],
    explainer: &A,
) -> Result<Vec<Vec<f64>>> {
    rows.par_iter()
        .zip(classes.par_iter())
        .enumerate()
        .map(|(i, (r, &c))| explainer.attribute(model, r, c, i))
        .collect()
}

fn as_attributions(phis: &[Vec<f64>]) -> Vec<Attribution> {
    phis.iter()
        .map(|p| Attribution {
            base_value: 0.0,
            value: 0.0,
            phi: p.clone(),
            class: None,
            instance: None,
        })
        .collect()
}

fn check_rows(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != model.n_features()) {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            actual: r.len(),
        });
    }
    Ok(())
}

/// Each row is explained for the class the model predicts on the unperturbed
/// row; perturbed copies keep that class.
pub fn consistency<A: Attributor + ?Sized>(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    explainer: &A,
    noise_frac: f64,
    runs: usize,
    seed: u64,
) -> Result<Consistency> {
    if rows.len() < MIN_ROWS {
        return Err(Error::invalid(format!(
            "consistency needs at least {MIN_ROWS} rows, got {}",
            rows.len()
        )));
    }
    if runs == 0 || !(noise_frac >= 0.0) {
        return Err(Error::invalid("consistency needs runs >= 1 and noise_frac >= 0"));
    }
    check_rows(model, rows)?;
    let d = model.n_features();
    let classes: Vec<usize> = rows.iter().map(|r| model.predict_index(r)).collect();
    let original = attribute_all(model, rows, &classes, explainer)?;
    let orig_mean = mean_abs(&as_attributions(&original), d);
    let std: Vec<f64> = (0..d)
        .map(|j| sample_std(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();

    let results: Vec<(f64, Vec<f64>)> = (0..runs)
        .map(|run| {
            let mut r = derived_rng(seed, run as u64);
            let noisy: Vec<Vec<f64>> = rows
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&std)
                        .map(|(&v, &s)| {
                            let sigma = noise_frac * s;
                            if sigma > 0.0 {
                                v + Normal::new(0.0, sigma).expect("positive sigma").sample(&mut r)
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            let perturbed = attribute_all(model, &noisy, &classes, explainer)?;
            let rho = spearman(&orig_mean, &mean_abs(&as_attributions(&perturbed), d));
            let per_feature = (0..d)
                .map(|j| {
                    let a: Vec<f64> = original.iter().map(|p| p[j]).collect();
                    let b: Vec<f64> = perturbed.iter().map(|p| p[j]).collect();
                    spearman(&a, &b)
                })
                .collect();
            Ok((rho, per_feature))
        })
        .collect::<Result<_>>()?;

    let per_run: Vec<f64> = results.iter().map(|(r, _)| *r).collect();
    let overall = per_run.iter().sum::<f64>() / runs as f64;
    let per_feature = (0..d)
        .map(|j| {
            let m = results.iter().map(|(_, pf)| pf[j]).sum::<f64>() / runs as f64;
            (model.feature_names[j].clone(), m)
        })
        .collect();
    Ok(Consistency {
        overall,
        per_run,
        per_feature,
    })
}

/// Fraction of rows whose predicted label survives replacing every feature
/// outside the row's top-k |phi| by `fill` (the training mean).
pub fn sufficiency_from_attributions(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    attributions: &[Vec<f64>],
    k: usize,
    fill: &[f64],
) -> Result<f64> {
    let d = model.n_features();
    if k > d {
        return Err(Error::invalid(format!("k = {k} exceeds the {d} active features")));
    }
    if rows.is_empty() || rows.len() != attributions.len() || fill.len() != d {
        return Err(Error::invalid("sufficiency needs one attribution and a fill value per feature"));
    }
    check_rows(model, rows)?;
    let kept = rows
        .par_iter()
        .zip(attributions.par_iter())
        .filter(|(row, phi)| {
            let abs: Vec<f64> = phi.iter().map(|p| p.abs()).collect();
            let top = &rank_descending(&abs)[..k];
            let mut masked = fill.to_vec();
            for &j in top {
                masked[j] = row[j];
            }
            model.predict_index(&masked) == model.predict_index(row)
        })
        .count();
    Ok(kept as f64 / rows.len() as f64)
}

pub fn sufficiency<A: Attributor + ?Sized>(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    explainer: &A,
    k: usize,
    fill: &[f64],
) -> Result<f64> {
    check_rows(model, rows)?;
    let classes: Vec<usize> = rows.iter().map(|r| model.predict_index(r)).collect();
    let phis = attribute_all(model, rows, &classes, explainer)?;
    sufficiency_from_attributions(model, rows, &phis, k, fill)
}

/// Column means of `rows`.
pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Consistency and sufficiency of `explainer` on `rows`; `training_rows` give
/// the masking means.
pub fn faithfulness_report<A: Attributor + ?Sized>(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    training_rows: &[Vec<f64>],
    explainer: &A,
    config: FaithfulnessConfig,
) -> Result<FaithfulnessReport> {
    let c = consistency(model, rows, explainer, config.noise_frac, config.runs, config.seed)?;
    let k = config.k.min(model.n_features());
    let s = sufficiency(model, rows, explainer, k, &column_means(training_rows))?;
    Ok(FaithfulnessReport {
        overall_consistency: c.overall,
        per_feature_consistency: c.per_feature,
        sufficiency: s,
        config: FaithfulnessConfig { k, ..config },
    })
}
