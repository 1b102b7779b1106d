//! Shapley-value and LIME attributions.
//!
//! All SHAP variants use the interventional value function: the value of a
//! coalition S is the mean, over background rows `b`, of the score of the row
//! that takes `x` on S and `b` elsewhere. The exact enumeration, the tree
//! algorithm and the kernel estimator therefore target the same numbers.

mod exact;
mod kernel;
mod lime;
mod tree_shap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::TrainedModel;
use crate::rng::{self, derive_seed};
use crate::stats::rank_descending;

pub use exact::{exact_shapley, EXACT_MAX_FEATURES};
pub use kernel::kernel_shap;
pub use lime::{
    lime_explain, render_condition, FeatureBins, LimeCondition, LimeConfig, LimeExplanation, QuartileDiscretizer,
    LIME_DEFAULT_K, LIME_DEFAULT_SAMPLES,
};
pub use tree_shap::tree_shap;

pub const DEFAULT_BACKGROUND: usize = 100;
pub const DEFAULT_KERNEL_SAMPLES: usize = 2048;

/// A scalar function of one row.
pub trait Scorer: Sync {
    fn score(&self, row: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Scorer for F {
    fn score(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Probability,
    Margin,
}

impl OutputMode {
    pub fn for_model(model: &TrainedModel) -> Self {
        if model.kind().explains_margins() {
            OutputMode::Margin
        } else {
            OutputMode::Probability
        }
    }
}

/// One class output of a trained model.
#[derive(Debug, Clone, Copy)]
pub struct ScoreFunction<'a> {
    pub model: &'a TrainedModel,
    pub class: usize,
    pub mode: OutputMode,
}

impl<'a> ScoreFunction<'a> {
    /// Uses the model kind's default output mode.
    pub fn new(model: &'a TrainedModel, class: usize) -> Result<Self> {
        Self::with_mode(model, class, OutputMode::for_model(model))
    }

    pub fn with_mode(model: &'a TrainedModel, class: usize, mode: OutputMode) -> Result<Self> {
        if class >= model.n_classes() {
            return Err(Error::invalid(format!(
                "class index {class} out of range for {} labels",
                model.n_classes()
            )));
        }
        if mode == OutputMode::Margin && model.margins(&vec![0.0; model.n_features()]).is_none() {
            return Err(Error::UnsupportedModel(format!("{} has no margin output", model.kind())));
        }
        Ok(ScoreFunction { model, class, mode })
    }
}

impl Scorer for ScoreFunction<'_> {
    fn score(&self, row: &[f64]) -> f64 {
        match self.mode {
            OutputMode::Probability => self.model.probabilities(row)[self.class],
            OutputMode::Margin => self
                .model
                .trees()
                .map_or_else(|| self.model.probabilities(row)[self.class], |t| t.score(row, self.class)),
        }
    }
}

/// Per-feature contributions for one instance: `base_value + sum(phi)`
/// reconstructs `value` for the exact and tree methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub base_value: f64,
    pub value: f64,
    pub phi: Vec<f64>,
    pub class: Option<String>,
    pub instance: Option<usize>,
}

impl Attribution {
    pub fn reconstruction_error(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.value).abs()
    }

    /// Feature positions by decreasing |phi| (lowest index on ties).
    pub fn ranking(&self) -> Vec<usize> {
        let abs: Vec<f64> = self.phi.iter().map(|p| p.abs()).collect();
        rank_descending(&abs)
    }
}

pub(crate) fn check_inputs(x: &[f64], background: &[Vec<f64>]) -> Result<usize> {
    if background.is_empty() {
        return Err(Error::invalid("background set is empty"));
    }
    let d = x.len();
    if d == 0 {
        return Err(Error::invalid("no features to attribute"));
    }
    if let Some(b) = background.iter().find(|b| b.len() != d) {
        return Err(Error::WidthMismatch {
            expected: d,
            actual: b.len(),
        });
    }
    Ok(d)
}

/// `mean_b f(x on S, b off S)`.
pub(crate) fn coalition_value<S: Scorer + ?Sized>(
    f: &S,
    x: &[f64],
    background: &[Vec<f64>],
    in_s: impl Fn(usize) -> bool,
) -> f64 {
    let mut row = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in background {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if in_s(j) { x[j] } else { b[j] };
        }
        total += f.score(&row);
    }
    total / background.len() as f64
}

/// Up to `n` distinct rows drawn without replacement (all rows when `n`
/// covers the matrix), in their original order.
pub fn sample_background(rows: &[Vec<f64>], n: usize, seed: u64) -> Vec<Vec<f64>> {
    if n >= rows.len() {
        return rows.to_vec();
    }
    let mut idx = sample(&mut rng::rng(seed), rows.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Tree,
    Kernel,
    Lime,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "tree" => Ok(Method::Tree),
            "kernel" => Ok(Method::Kernel),
            "lime" => Ok(Method::Lime),
            _ => Err(Error::invalid(format!("unknown explainer `{s}` (exact|tree|kernel|lime)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Tree => "tree",
            Method::Kernel => "kernel",
            Method::Lime => "lime",
        })
    }
}

/// A configured explainer bound to training-derived context.
#[derive(Debug, Clone)]
pub struct Explainer {
    pub method: Method,
    pub background: Vec<Vec<f64>>,
    pub discretizer: Option<QuartileDiscretizer>,
    pub kernel_samples: usize,
    pub lime: LimeConfig,
    pub seed: u64,
}

impl Explainer {
    /// `training` must hold the model's features in model order.
    pub fn from_training(method: Method, training: &FeatureMatrix, n_background: usize, seed: u64) -> Result<Self> {
        if training.n_rows() == 0 {
            return Err(Error::invalid("explainer needs training rows"));
        }
        let background = sample_background(training.rows(), n_background, seed);
        let discretizer = if method == Method::Lime {
            Some(QuartileDiscretizer::fit(training.names(), training.rows())?)
        } else {
            None
        };
        Ok(Explainer {
            method,
            background,
            discretizer,
            kernel_samples: DEFAULT_KERNEL_SAMPLES,
            lime: LimeConfig {
                seed,
                ..LimeConfig::default()
            },
            seed,
        })
    }

    pub fn check_model(&self, model: &TrainedModel) -> Result<()> {
        if self.method == Method::Tree {
            model
                .trees()
                .ok_or_else(|| Error::UnsupportedModel(format!("tree SHAP cannot explain {}", model.kind())))?;
        }
        if self.method == Method::Exact && model.n_features() > EXACT_MAX_FEATURES {
            return Err(Error::TooManyFeatures {
                method: "exact Shapley enumeration",
                max: EXACT_MAX_FEATURES,
                actual: model.n_features(),
            });
        }
        if self.method == Method::Lime && self.discretizer.is_none() {
            return Err(Error::invalid("LIME needs a discretizer fitted on training data"));
        }
        Ok(())
    }

    /// Attribution of `class` at `row`; `instance` salts the random stream.
    /// LIME weights appear as `phi` (0 for features without a condition).
    pub fn explain(&self, model: &TrainedModel, row: &[f64], class: usize, instance: usize) -> Result<Attribution> {
        self.check_model(model)?;
        if row.len() != model.n_features() {
            return Err(Error::WidthMismatch {
                expected: model.n_features(),
                actual: row.len(),
            });
        }
        let f = ScoreFunction::new(model, class)?;
        let seed = derive_seed(self.seed, instance as u64);
        let mut a = match self.method {
            Method::Exact => exact_shapley(&f, row, &self.background)?,
            Method::Tree => tree_shap(model.trees().expect("checked"), row, class, &self.background)?,
            Method::Kernel => kernel_shap(&f, row, &self.background, self.kernel_samples.max(2 * row.len() + 2), seed)?,
            Method::Lime => {
                let cfg = LimeConfig { seed, ..self.lime };
                let e = lime_explain(&f, row, self.discretizer.as_ref().expect("checked"), cfg)?;
                Attribution {
                    base_value: e.intercept,
                    value: e.value,
                    phi: e.weights(row.len()),
                    class: None,
                    instance: None,
                }
            }
        };
        a.class = Some(model.labels[class].clone());
        a.instance = Some(instance);
        Ok(a)
    }

    /// Full LIME explanation (conditions and weights).
    pub fn explain_lime(&self, model: &TrainedModel, row: &[f64], class: usize, instance: usize) -> Result<LimeExplanation> {
        let disc = self
            .discretizer
            .as_ref()
            .ok_or_else(|| Error::invalid("LIME needs a discretizer fitted on training data"))?;
        let f = ScoreFunction::new(model, class)?;
        let cfg = LimeConfig {
            seed: derive_seed(self.seed, instance as u64),
            ..self.lime
        };
        lime_explain(&f, row, disc, cfg)
    }

    /// Attributions for every row, computed in parallel.
    pub fn explain_rows(&self, model: &TrainedModel, rows: &[Vec<f64>], class: usize) -> Result<Vec<Attribution>> {
        rows.par_iter()
            .enumerate()
            .map(|(i, r)| self.explain(model, r, class, i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAttribution {
    pub names: Vec<String>,
    pub class: String,
    pub scores: Vec<f64>,
    /// Positions into `names`, most important first.
    pub ranking: Vec<usize>,
}

impl MeanAttribution {
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking.iter().map(|&i| self.names[i].as_str()).collect()
    }
}

/// Mean of |phi| over already computed attributions.
pub fn mean_abs(attributions: &[Attribution], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    for a in attributions {
        s.iter_mut().zip(&a.phi).for_each(|(t, p)| *t += p.abs());
    }
    let n = attributions.len().max(1) as f64;
    s.iter_mut().for_each(|v| *v /= n);
    s
}

/// Mean |phi| per feature over every row of `m` for one class.
pub fn mean_abs_attributions(
    model: &TrainedModel,
    m: &FeatureMatrix,
    class: usize,
    explainer: &Explainer,
) -> Result<MeanAttribution> {
    let aligned = model.align(m)?;
    if aligned.n_rows() == 0 {
        return Err(Error::invalid("no rows to explain"));
    }
    let attributions = explainer.explain_rows(model, aligned.rows(), class)?;
    let scores = mean_abs(&attributions, model.n_features());
    Ok(MeanAttribution {
        names: model.feature_names.clone(),
        class: model.labels[class].clone(),
        ranking: rank_descending(&scores),
        scores,
    })
}
